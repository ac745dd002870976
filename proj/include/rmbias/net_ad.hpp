#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rmbias/jet.hpp"

namespace rmbias {

enum class Architecture { plain, resnet };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

/// Fully connected tanh network R -> R.
///
/// widths = [1, m_1, ..., m_{L-1}, 1]; weights[l] is widths[l+1] x widths[l].
/// Hidden outputs are h^1 .. h^{L-1}. With the resnet architecture, h^l receives
/// skip_scale * h^{l-2} for every odd l >= 3 whose width matches widths[l-2]
/// (an identity skip around each pair of hidden layers). skip_scale is not trained.
///
/// Flat parameter ordering (version 1): layer-major; within a layer the weight
/// matrix row-major, then the bias vector.
struct NetworkParams {
  std::vector<int> widths;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Architecture architecture = Architecture::plain;
  double skip_scale = 1.0;
  std::uint64_t seed = 0;

  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;
  /// True if hidden output h^l (1-based) receives a skip from h^{l-2}.
  bool has_skip_into(std::size_t l) const;

  Eigen::VectorXd flatten() const;
  void assign(std::span<const double> theta);

  /// Throws ConfigError if shapes disagree with widths.
  void validate() const;
};

inline constexpr int kParameterOrderingVersion = 1;

/// Xavier-normal weights with variance 2 / (fan_in + fan_out), zero biases.
NetworkParams init_xavier(const std::vector<int>& widths, Architecture architecture, std::uint64_t seed);

Jet2 forward_jet(const NetworkParams& params, double x);
JetFunction as_function(const NetworkParams& params);

/// Jets at many points, one column per point.
struct JetBatch {
  Eigen::RowVectorXd value, d1, d2;
};
JetBatch forward_batch(const NetworkParams& params, std::span<const double> xs);

/// weight * (c0 w(x) + c1 w'(x) + c2 w''(x) - target)^2, scaled by the channel's factor.
struct LossTerm {
  double x;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double target = 0.0;
  double weight = 1.0;
  int channel = 0;
};

/// Loss terms grouped by distinct sample point so the jet forward pass runs once per point.
class CompiledLoss {
 public:
  explicit CompiledLoss(std::vector<LossTerm> terms, std::vector<double> channel_scales = {1.0});

  const std::vector<double>& points() const { return points_; }
  const std::vector<LossTerm>& terms() const { return terms_; }
  const std::vector<std::size_t>& term_columns() const { return columns_; }
  const std::vector<double>& channel_scales() const { return scales_; }

 private:
  std::vector<LossTerm> terms_;
  std::vector<std::size_t> columns_;
  std::vector<double> points_;
  std::vector<double> scales_;
};

struct LossEvaluation {
  double total = 0.0;
  /// Unscaled per-channel sums of weight * residual^2.
  std::vector<double> channels;
  /// Gradient of `total` in the flat ordering; empty when not requested.
  Eigen::VectorXd gradient;
};

LossEvaluation evaluate_loss(const NetworkParams& params, const CompiledLoss& loss, bool with_gradient);

/// Exact gradient of sum_t scale[channel_t] * weight_t * residual_t^2 with respect to the flat parameters.
Eigen::VectorXd grad_params(const NetworkParams& params, const std::vector<LossTerm>& loss_terms,
                            const std::vector<double>& channel_scales = {1.0});

/// Checkpoint: a JSON document with the header fields and the flat parameter vector.
void save_checkpoint(const NetworkParams& params, std::ostream& os);
NetworkParams load_checkpoint(std::istream& is);

}  // namespace rmbias
