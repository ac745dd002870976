#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "rmbias/exact_solve.hpp"
#include "rmbias/net_ad.hpp"

namespace rmbias {

enum class SampleMode { iid_uniform, fixed_grid };

std::string to_string(SampleMode m);
SampleMode sample_mode_from_string(const std::string& s);

/// Interior points S_int and the two boundary points S_bd.
struct SampleSet {
  double lo;
  double hi;
  std::vector<double> interior;
  std::array<double, 2> boundary;
  std::uint64_t seed;
  SampleMode mode;
};

/// Offset applied to a sample that lands exactly on a breakpoint.
inline constexpr double kBreakpointShift = 1e-12;

/// iid uniform points in (lo, hi), or the n_int interior nodes of a uniform grid.
SampleSet draw_samples(double lo, double hi, std::size_t n_int, SampleMode mode, std::uint64_t seed,
                       const std::vector<double>& breakpoints);

enum class RiskKind { rm, effective, supervised };

std::string to_string(RiskKind k);
RiskKind risk_kind_from_string(const std::string& s);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// When positive, the rate decays geometrically from lr to lr_final over the run.
  double lr_final = 0.0;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct GdConfig {
  double lr = 1e-3;

  friend bool operator==(const GdConfig&, const GdConfig&) = default;
};

using OptimizerConfig = std::variant<AdamConfig, GdConfig>;

struct TrainConfig {
  double gamma = 1.0;
  std::size_t n_int = 1000;
  std::size_t steps = 0;
  OptimizerConfig optimizer = AdamConfig{};
  std::uint64_t seed = 0;  ///< sample seed
  std::size_t resample_every = 0;
  RiskKind risk_kind = RiskKind::rm;
  SampleMode sample_mode = SampleMode::iid_uniform;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// total = interior + gamma * boundary
struct RiskValues {
  double total;
  double interior;
  double boundary;
};

/// |Omega|/n_int * sum r(x)^2 + gamma * |dOmega|/n_bd * (w(lo)^2 + w(hi)^2).
/// rm uses the classical derivative of A off the jumps; effective uses its absolutely
/// continuous part. Off the jump set the two coincide.
RiskValues empirical_risk(const JetFunction& w, const BVPProblem& problem, const SampleSet& samples,
                          RiskKind kind, double gamma);

/// |Omega|/n_int * sum [(w - u)^2 + (w' - u')^2] + gamma * |dOmega|/n_bd * sum_b (w - u)^2.
RiskValues supervised_risk(const JetFunction& w, const SolutionFunction& target, const SampleSet& samples,
                           double gamma);

/// Loss terms reproducing empirical_risk / supervised_risk for a network.
/// Channel 0 is the interior sum, channel 1 the boundary sum (scaled by gamma).
CompiledLoss compile_risk(const BVPProblem& problem, const SolutionFunction* target, const SampleSet& samples,
                          RiskKind kind, double gamma);

struct RiskRecord {
  std::size_t step;
  double total;
  double interior;
  double boundary;
};

struct RunRecord {
  /// Risk at the parameters before each update, plus one entry for the final parameters.
  std::vector<RiskRecord> risks;
  NetworkParams final_params;
  double wall_seconds = 0.0;
  TrainConfig config;

  const RiskRecord& final_risk() const { return risks.back(); }
  void write_csv(std::ostream& os, const std::string& comment = {}) const;
};

/// Runs config.steps optimizer iterations. `target` is required for supervised runs.
RunRecord train(NetworkParams params, const BVPProblem& problem, const SolutionFunction* target,
                const TrainConfig& config);

/// Sequential phases, each starting from the previous phase's final parameters.
/// Supervised phases fit `supervised_target`.
std::vector<RunRecord> run_phase_plan(const NetworkParams& initial, const BVPProblem& problem,
                                      const SolutionFunction& supervised_target,
                                      const std::vector<TrainConfig>& phases);

std::string summary_json(const RunRecord& record);

}  // namespace rmbias
