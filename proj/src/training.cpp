#include "rmbias/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "json.hpp"
#include "rmbias/errors.hpp"

namespace rmbias {

std::string to_string(SampleMode m) { return m == SampleMode::iid_uniform ? "iid_uniform" : "fixed_grid"; }

SampleMode sample_mode_from_string(const std::string& s) {
  if (s == "iid_uniform") return SampleMode::iid_uniform;
  if (s == "fixed_grid") return SampleMode::fixed_grid;
  throw ConfigError("sample mode must be \"iid_uniform\" or \"fixed_grid\", got \"" + s + "\"");
}

std::string to_string(RiskKind k) {
  switch (k) {
    case RiskKind::rm: return "rm";
    case RiskKind::effective: return "effective";
    case RiskKind::supervised: return "supervised";
  }
  return "rm";
}

RiskKind risk_kind_from_string(const std::string& s) {
  if (s == "rm") return RiskKind::rm;
  if (s == "effective") return RiskKind::effective;
  if (s == "supervised") return RiskKind::supervised;
  throw ConfigError("risk kind must be \"rm\", \"effective\" or \"supervised\", got \"" + s + "\"");
}

SampleSet draw_samples(double lo, double hi, std::size_t n_int, SampleMode mode, std::uint64_t seed,
                       const std::vector<double>& breakpoints) {
  if (n_int < 1) throw ConfigError("n_int must be at least 1");
  if (!(lo < hi)) throw ConfigError("sample domain must satisfy lo < hi");
  SampleSet s{lo, hi, {}, {lo, hi}, seed, mode};
  s.interior.reserve(n_int);
  if (mode == SampleMode::fixed_grid) {
    const double h = (hi - lo) / static_cast<double>(n_int + 1);
    for (std::size_t i = 1; i <= n_int; ++i) s.interior.push_back(lo + static_cast<double>(i) * h);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(lo, hi);
    while (s.interior.size() < n_int) {
      const double x = uniform(rng);
      if (x > lo && x < hi) s.interior.push_back(x);
    }
  }
  for (double& x : s.interior)
    if (std::find(breakpoints.begin(), breakpoints.end(), x) != breakpoints.end()) x += kBreakpointShift;
  return s;
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("training.gamma must be non-negative");
  if (n_int < 1) throw ConfigError("training.n_int must be at least 1");
  const double lr = std::visit([](const auto& o) { return o.lr; }, optimizer);
  if (!(lr > 0.0) && !std::holds_alternative<GdConfig>(optimizer))
    throw ConfigError("training.optimizer.lr must be positive");
  if (!(lr >= 0.0)) throw ConfigError("training.optimizer.lr must be non-negative");
  if (const auto* a = std::get_if<AdamConfig>(&optimizer); a && !(a->lr_final >= 0.0))
    throw ConfigError("training.optimizer.lr_final must be non-negative");
}

namespace {

double interior_residual(const Jet2& w, const BVPProblem& p, double x, RiskKind kind) {
  const auto& d = p.decomp();
  const double dA = kind == RiskKind::rm ? d.dA_classical(x) : d.dA_abs(x);
  return d.A(x) * w.d2 + dA * w.d1 + p.f().evaluate(x);
}

}  // namespace

RiskValues empirical_risk(const JetFunction& w, const BVPProblem& problem, const SampleSet& samples,
                          RiskKind kind, double gamma) {
  if (kind == RiskKind::supervised) throw ConfigError("supervised risk needs a target; use supervised_risk");
  double sum = 0.0;
  for (double x : samples.interior) {
    const double r = interior_residual(w(x), problem, x, kind);
    sum += r * r;
  }
  const double interior = (samples.hi - samples.lo) / static_cast<double>(samples.interior.size()) * sum;
  double bsum = 0.0;
  for (double x : samples.boundary) bsum += std::pow(w(x).value, 2);
  // |dOmega| / n_bd = 2 / 2 in one dimension
  const double boundary = 2.0 / 2.0 * bsum;
  return {interior + gamma * boundary, interior, boundary};
}

RiskValues supervised_risk(const JetFunction& w, const SolutionFunction& target, const SampleSet& samples,
                           double gamma) {
  double sum = 0.0;
  for (double x : samples.interior) {
    const Jet2 a = w(x), b = target.jet(x);
    sum += std::pow(a.value - b.value, 2) + std::pow(a.d1 - b.d1, 2);
  }
  const double interior = (samples.hi - samples.lo) / static_cast<double>(samples.interior.size()) * sum;
  double bsum = 0.0;
  for (double x : samples.boundary) bsum += std::pow(w(x).value - target.value(x), 2);
  const double boundary = 2.0 / 2.0 * bsum;
  return {interior + gamma * boundary, interior, boundary};
}

CompiledLoss compile_risk(const BVPProblem& problem, const SolutionFunction* target, const SampleSet& samples,
                          RiskKind kind, double gamma) {
  const double w_int = (samples.hi - samples.lo) / static_cast<double>(samples.interior.size());
  const double w_bd = 2.0 / 2.0;
  std::vector<LossTerm> terms;
  const auto& d = problem.decomp();
  if (kind == RiskKind::supervised) {
    if (target == nullptr) throw ConfigError("supervised training needs a target solution");
    terms.reserve(2 * samples.interior.size() + 2);
    for (double x : samples.interior) {
      const Jet2 u = target->jet(x);
      terms.push_back({x, 1.0, 0.0, 0.0, u.value, w_int, 0});
      terms.push_back({x, 0.0, 1.0, 0.0, u.d1, w_int, 0});
    }
    for (double x : samples.boundary) terms.push_back({x, 1.0, 0.0, 0.0, target->value(x), w_bd, 1});
  } else {
    terms.reserve(samples.interior.size() + 2);
    for (double x : samples.interior) {
      const double dA = kind == RiskKind::rm ? d.dA_classical(x) : d.dA_abs(x);
      terms.push_back({x, 0.0, dA, d.A(x), -problem.f().evaluate(x), w_int, 0});
    }
    for (double x : samples.boundary) terms.push_back({x, 1.0, 0.0, 0.0, 0.0, w_bd, 1});
  }
  return CompiledLoss(std::move(terms), {1.0, gamma});
}

void RunRecord::write_csv(std::ostream& os, const std::string& comment) const {
  const auto old = os.precision(17);
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "step,total,interior,boundary\n";
  for (const RiskRecord& r : risks) os << r.step << ',' << r.total << ',' << r.interior << ',' << r.boundary << '\n';
  os.precision(old);
}

namespace {

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, Eigen::Index n, std::size_t steps) : cfg_(cfg), steps_(steps) {
    if (std::holds_alternative<AdamConfig>(cfg_)) {
      m_ = Eigen::VectorXd::Zero(n);
      v_ = Eigen::VectorXd::Zero(n);
    }
  }

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
    if (const auto* gd = std::get_if<GdConfig>(&cfg_)) {
      theta -= gd->lr * grad;
      return;
    }
    const AdamConfig& a = std::get<AdamConfig>(cfg_);
    ++t_;
    m_ = a.beta1 * m_ + (1.0 - a.beta1) * grad;
    v_ = a.beta2 * v_ + (1.0 - a.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t_));
    double lr = a.lr;
    if (a.lr_final > 0.0 && steps_ > 1)
      lr *= std::pow(a.lr_final / a.lr, static_cast<double>(t_ - 1) / static_cast<double>(steps_ - 1));
    theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + a.eps);
  }

 private:
  OptimizerConfig cfg_;
  Eigen::VectorXd m_, v_;
  std::size_t steps_;
  std::size_t t_ = 0;
};

}  // namespace

RunRecord train(NetworkParams params, const BVPProblem& problem, const SolutionFunction* target,
                const TrainConfig& config) {
  config.validate();
  params.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double>& knots = problem.knots();
  const std::vector<double> breakpoints(knots.begin() + 1, knots.end() - 1);

  auto sample_and_compile = [&](std::uint64_t seed) {
    const SampleSet s = draw_samples(problem.domain_lo(), problem.domain_hi(), config.n_int, config.sample_mode,
                                     seed, breakpoints);
    return compile_risk(problem, target, s, config.risk_kind, config.gamma);
  };
  CompiledLoss loss = sample_and_compile(config.seed);

  RunRecord rec;
  rec.config = config;
  rec.risks.reserve(config.steps + 1);
  Eigen::VectorXd theta = params.flatten();
  Optimizer opt(config.optimizer, theta.size(), config.steps);

  for (std::size_t k = 0;; ++k) {
    if (config.resample_every > 0 && k > 0 && k < config.steps && k % config.resample_every == 0)
      loss = sample_and_compile(config.seed + k / config.resample_every);
    const bool update = k < config.steps;
    const LossEvaluation ev = evaluate_loss(params, loss, update);
    if (!std::isfinite(ev.total)) throw NumericalAbort(k, "risk is not finite");
    rec.risks.push_back({k, ev.total, ev.channels[0], ev.channels[1]});
    if (!update) break;
    if (!ev.gradient.allFinite()) throw NumericalAbort(k, "gradient is not finite");
    opt.step(theta, ev.gradient);
    params.assign(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
  }
  rec.final_params = std::move(params);
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<RunRecord> run_phase_plan(const NetworkParams& initial, const BVPProblem& problem,
                                      const SolutionFunction& supervised_target,
                                      const std::vector<TrainConfig>& phases) {
  std::vector<RunRecord> out;
  NetworkParams current = initial;
  for (const TrainConfig& cfg : phases) {
    const SolutionFunction* target = cfg.risk_kind == RiskKind::supervised ? &supervised_target : nullptr;
    out.push_back(train(current, problem, target, cfg));
    current = out.back().final_params;
  }
  return out;
}

std::string summary_json(const RunRecord& record) {
  nlohmann::json j;
  const RiskRecord& first = record.risks.front();
  const RiskRecord& last = record.risks.back();
  j["risk_kind"] = to_string(record.config.risk_kind);
  j["steps"] = record.config.steps;
  j["gamma"] = record.config.gamma;
  j["n_int"] = record.config.n_int;
  j["sample_seed"] = record.config.seed;
  j["network_seed"] = record.final_params.seed;
  j["initial_risk"] = {{"total", first.total}, {"interior", first.interior}, {"boundary", first.boundary}};
  j["final_risk"] = {{"total", last.total}, {"interior", last.interior}, {"boundary", last.boundary}};
  j["wall_seconds"] = record.wall_seconds;
  return j.dump(2);
}

}  // namespace rmbias
