#include "rmbias/net_ad.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "rmbias/errors.hpp"

namespace rmbias {

std::string to_string(Architecture a) { return a == Architecture::plain ? "plain" : "resnet"; }

Architecture architecture_from_string(const std::string& s) {
  if (s == "plain") return Architecture::plain;
  if (s == "resnet") return Architecture::resnet;
  throw ConfigError("architecture must be \"plain\" or \"resnet\", got \"" + s + "\"");
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    n += static_cast<std::size_t>(widths[l + 1]) * (static_cast<std::size_t>(widths[l]) + 1);
  return n;
}

bool NetworkParams::has_skip_into(std::size_t l) const {
  return architecture == Architecture::resnet && l >= 3 && l + 1 < widths.size() && (l - 1) % 2 == 0 &&
         widths[l] == widths[l - 2];
}

void NetworkParams::validate() const {
  if (widths.size() < 3) throw ConfigError("network.widths: need at least one hidden layer");
  if (widths.front() != 1 || widths.back() != 1)
    throw ConfigError("network.widths: must start and end with 1");
  for (std::size_t i = 0; i < widths.size(); ++i)
    if (widths[i] < 1) throw ConfigError("network.widths[" + std::to_string(i) + "] must be positive");
  if (weights.size() != widths.size() - 1 || biases.size() != widths.size() - 1)
    throw ConfigError("network: expected one weight matrix and bias per layer");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != widths[l + 1] || weights[l].cols() != widths[l] || biases[l].size() != widths[l + 1])
      throw ConfigError("network: layer " + std::to_string(l) + " shape disagrees with widths");
  }
}

Eigen::VectorXd NetworkParams::flatten() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights[l].cols(); ++c) theta[k++] = weights[l](r, c);
    for (Eigen::Index r = 0; r < biases[l].size(); ++r) theta[k++] = biases[l][r];
  }
  return theta;
}

void NetworkParams::assign(std::span<const double> theta) {
  if (theta.size() != parameter_count())
    throw ConfigError("parameter vector has " + std::to_string(theta.size()) + " entries, expected " +
                      std::to_string(parameter_count()));
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights[l].cols(); ++c) weights[l](r, c) = theta[k++];
    for (Eigen::Index r = 0; r < biases[l].size(); ++r) biases[l][r] = theta[k++];
  }
}

NetworkParams init_xavier(const std::vector<int>& widths, Architecture architecture, std::uint64_t seed) {
  NetworkParams p;
  p.widths = widths;
  p.architecture = architecture;
  p.seed = seed;
  if (widths.size() < 3 || widths.front() != 1 || widths.back() != 1 ||
      std::any_of(widths.begin(), widths.end(), [](int w) { return w < 1; }))
    throw ConfigError("network.widths: must look like [1, m_1, ..., m_{L-1}, 1] with positive entries");

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l], fan_out = widths[l + 1];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (fan_in + fan_out)));
    Eigen::MatrixXd W(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) W(r, c) = normal(rng);
    p.weights.push_back(std::move(W));
    p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return p;
}

namespace {

// Jets of one layer stored side by side: columns [0,n) values, [n,2n) first
// derivatives, [2n,3n) second derivatives. One GEMM then carries all three.
struct Workspace {
  Eigen::Index n = 0;
  std::vector<Eigen::MatrixXd> h;    // h[l]: input of layer l, m_l x 3n
  std::vector<Eigen::ArrayXXd> t;    // tanh of hidden pre-activations
  std::vector<Eigen::MatrixXd> z;    // stacked pre-activation jets of hidden layers
  std::vector<Eigen::MatrixXd> adj;  // adjoint of h[l]
  std::vector<bool> adj_set;
  Eigen::MatrixXd out, gz;
};

// Reused across calls so training steps do not hit the allocator.
Workspace& workspace() {
  thread_local Workspace ws;
  return ws;
}

void forward(const NetworkParams& p, std::span<const double> xs, Workspace& ws) {
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  const std::size_t L = p.layer_count();
  ws.n = n;
  ws.h.resize(L);
  ws.t.resize(L);
  ws.z.resize(L);

  ws.h[0].resize(1, 3 * n);
  ws.h[0].leftCols(n) = Eigen::Map<const Eigen::RowVectorXd>(xs.data(), n);
  ws.h[0].middleCols(n, n).setOnes();
  ws.h[0].rightCols(n).setZero();

  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd& z = l + 1 == L ? ws.out : ws.z[l];
    z.noalias() = p.weights[l] * ws.h[l];
    z.leftCols(n).colwise() += p.biases[l];
    if (l + 1 == L) break;

    Eigen::ArrayXXd& t = ws.t[l];
    t = z.leftCols(n).array().tanh();
    const auto z1 = z.middleCols(n, n).array();
    const auto z2 = z.rightCols(n).array();
    const auto s = 1.0 - t.square();
    Eigen::MatrixXd& h = ws.h[l + 1];
    h.resize(z.rows(), 3 * n);
    h.leftCols(n) = t.matrix();
    h.middleCols(n, n) = (s * z1).matrix();
    h.rightCols(n) = (s * z2 - 2.0 * t * s * z1.square()).matrix();
    if (p.has_skip_into(l + 1)) h += p.skip_scale * ws.h[l - 1];
  }
}

}  // namespace

JetBatch forward_batch(const NetworkParams& params, std::span<const double> xs) {
  Workspace& ws = workspace();
  forward(params, xs, ws);
  const Eigen::Index n = ws.n;
  return {ws.out.leftCols(n), ws.out.middleCols(n, n), ws.out.rightCols(n)};
}

Jet2 forward_jet(const NetworkParams& params, double x) {
  Workspace& ws = workspace();
  forward(params, std::span<const double>(&x, 1), ws);
  return {ws.out(0, 0), ws.out(0, 1), ws.out(0, 2)};
}

JetFunction as_function(const NetworkParams& params) {
  return [params](double x) { return forward_jet(params, x); };
}

CompiledLoss::CompiledLoss(std::vector<LossTerm> terms, std::vector<double> channel_scales)
    : terms_(std::move(terms)), scales_(std::move(channel_scales)) {
  std::map<double, std::size_t> index;
  columns_.reserve(terms_.size());
  for (const LossTerm& t : terms_) {
    if (t.channel < 0 || static_cast<std::size_t>(t.channel) >= scales_.size())
      throw ConfigError("loss term channel " + std::to_string(t.channel) + " has no scale");
    auto [it, inserted] = index.try_emplace(t.x, points_.size());
    if (inserted) points_.push_back(t.x);
    columns_.push_back(it->second);
  }
}

LossEvaluation evaluate_loss(const NetworkParams& params, const CompiledLoss& loss, bool with_gradient) {
  params.validate();
  Workspace& ws = workspace();
  forward(params, loss.points(), ws);
  const Eigen::Index n = ws.n;
  const std::size_t L = params.layer_count();

  LossEvaluation ev;
  ev.channels.assign(loss.channel_scales().size(), 0.0);
  // adjoint of the stacked output jets
  Eigen::MatrixXd& gout = ws.gz;
  gout.setZero(1, 3 * n);
  const auto& terms = loss.terms();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const LossTerm& t = terms[i];
    const Eigen::Index c = static_cast<Eigen::Index>(loss.term_columns()[i]);
    const double r = t.c0 * ws.out(0, c) + t.c1 * ws.out(0, n + c) + t.c2 * ws.out(0, 2 * n + c) - t.target;
    const double scale = loss.channel_scales()[static_cast<std::size_t>(t.channel)];
    ev.channels[static_cast<std::size_t>(t.channel)] += t.weight * r * r;
    const double g = 2.0 * scale * t.weight * r;
    gout(0, c) += g * t.c0;
    gout(0, n + c) += g * t.c1;
    gout(0, 2 * n + c) += g * t.c2;
  }
  for (std::size_t k = 0; k < ev.channels.size(); ++k) ev.total += loss.channel_scales()[k] * ev.channels[k];
  if (!with_gradient) return ev;

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  ev.gradient.resize(static_cast<Eigen::Index>(params.parameter_count()));
  std::vector<double*> slot(L);
  {
    double* p = ev.gradient.data();
    for (std::size_t l = 0; l < L; ++l) {
      slot[l] = p;
      p += params.weights[l].size() + params.biases[l].size();
    }
  }
  ws.adj.resize(L);
  ws.adj_set.assign(L, false);

  // ws.gz holds the adjoint of the stacked pre-activation of layer l
  for (std::size_t l = L; l-- > 0;) {
    const Eigen::MatrixXd& W = params.weights[l];
    if (l + 1 < L) {
      const Eigen::MatrixXd& a = ws.adj[l + 1];
      if (params.has_skip_into(l + 1)) {
        ws.adj[l - 1] = params.skip_scale * a;
        ws.adj_set[l - 1] = true;
      }
      const Eigen::ArrayXXd& t = ws.t[l];
      const auto z1 = ws.z[l].middleCols(n, n).array();
      const auto z2 = ws.z[l].rightCols(n).array();
      const auto a0 = a.leftCols(n).array();
      const auto a1 = a.middleCols(n, n).array();
      const auto a2 = a.rightCols(n).array();
      const auto s = 1.0 - t.square();
      const auto ts = t * s;
      ws.gz.resize(W.rows(), 3 * n);
      ws.gz.rightCols(n) = (a2 * s).matrix();
      ws.gz.middleCols(n, n) = (a1 * s - 4.0 * a2 * ts * z1).matrix();
      ws.gz.leftCols(n) =
          (a0 * s - 2.0 * a1 * ts * z1 - 2.0 * a2 * (ts * z2 + z1.square() * s * (s - 2.0 * t.square()))).matrix();
    }
    Eigen::Map<RowMajor> gW(slot[l], W.rows(), W.cols());
    gW.noalias() = ws.gz * ws.h[l].transpose();
    Eigen::Map<Eigen::VectorXd>(slot[l] + W.size(), W.rows()) = ws.gz.leftCols(n).rowwise().sum();
    if (l > 0) {
      if (ws.adj_set[l])
        ws.adj[l].noalias() += W.transpose() * ws.gz;
      else
        ws.adj[l].noalias() = W.transpose() * ws.gz;
    }
  }
  return ev;
}

Eigen::VectorXd grad_params(const NetworkParams& params, const std::vector<LossTerm>& loss_terms,
                            const std::vector<double>& channel_scales) {
  return evaluate_loss(params, CompiledLoss(loss_terms, channel_scales), true).gradient;
}

void save_checkpoint(const NetworkParams& params, std::ostream& os) {
  params.validate();
  nlohmann::json j;
  j["header"] = {{"format", "rmbias-checkpoint"},
                 {"ordering_version", kParameterOrderingVersion},
                 {"widths", params.widths},
                 {"architecture", to_string(params.architecture)},
                 {"skip_scale", params.skip_scale},
                 {"seed", params.seed},
                 {"parameter_count", params.parameter_count()}};
  const Eigen::VectorXd theta = params.flatten();
  j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  os << j.dump(1) << '\n';
}

NetworkParams load_checkpoint(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  try {
    const auto& h = j.at("header");
    if (h.at("format").get<std::string>() != "rmbias-checkpoint")
      throw ConfigError("checkpoint: unknown format");
    if (h.at("ordering_version").get<int>() != kParameterOrderingVersion)
      throw ConfigError("checkpoint: unsupported parameter ordering version");
    NetworkParams p = init_xavier(h.at("widths").get<std::vector<int>>(),
                                  architecture_from_string(h.at("architecture").get<std::string>()),
                                  h.at("seed").get<std::uint64_t>());
    p.skip_scale = h.at("skip_scale").get<double>();
    const auto theta = j.at("theta").get<std::vector<double>>();
    p.assign(theta);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace rmbias
