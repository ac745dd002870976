#include "rmbias/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rmbias/errors.hpp"

namespace rmbias {

using nlohmann::json;

PiecewiseFunction1D PiecewiseSpec::build(double lo, double hi) const {
  std::vector<Polynomial> ps;
  for (const auto& c : pieces) ps.emplace_back(c);
  return PiecewiseFunction1D(lo, hi, breakpoints, std::move(ps));
}

namespace {

template <class Fn>
auto with_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const EllipticityError& e) {
    throw EllipticityError(path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path + "." + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

BVPProblem ProblemSpec::build() const {
  if (!(lo < hi)) throw ConfigError("problem.domain: expected [lo, hi] with lo < hi");
  if (chi_values.size() != chi_breakpoints.size() + 1)
    throw ConfigError("problem.chi.values: expected one value per piece (" +
                      std::to_string(chi_breakpoints.size() + 1) + ")");
  auto chi = with_path("problem.chi", [&] {
    return PiecewiseFunction1D::piecewise_constant(lo, hi, chi_breakpoints, chi_values);
  });
  auto fn = with_path("problem.f", [&] { return f.build(lo, hi); });
  auto decomp = with_path("problem", [&] { return CoefficientDecomposition(chi, Polynomial(a_bar)); });
  return BVPProblem(std::move(decomp), std::move(fn));
}

NetworkParams NetworkSpec::initialize() const {
  NetworkParams p = with_path("network", [&] { return init_xavier(widths, architecture, seed); });
  p.skip_scale = skip_scale;
  return p;
}

std::vector<TrainConfig> TrainingSpec::phase_configs() const {
  std::vector<TrainConfig> out;
  for (const PhaseSpec& ph : phases) {
    TrainConfig c;
    c.gamma = gamma;
    c.n_int = n_int;
    c.steps = ph.steps;
    c.optimizer = ph.optimizer;
    c.seed = sample_seed;
    c.resample_every = resample_every;
    c.risk_kind = ph.kind;
    c.sample_mode = sample_mode;
    out.push_back(c);
  }
  return out;
}

void ScenarioConfig::validate() const {
  const BVPProblem p = problem.build();
  const NetworkParams net = network.initialize();
  (void)net;
  const auto configs = training.phase_configs();
  for (std::size_t i = 0; i < configs.size(); ++i)
    with_path("training.phases[" + std::to_string(i) + "]", [&] {
      configs[i].validate();
      return 0;
    });
  if (solver.rk_steps_per_interval < 2) throw ConfigError("solver.rk_steps_per_interval: must be at least 2");
  if (!(solver.kernel_tolerance >= 0.0)) throw ConfigError("solver.kernel_tolerance: must be non-negative");
  if (outputs.grid_points < 2) throw ConfigError("outputs.grid_points: must be at least 2");
  if (mu_phi) with_path("mu.phi", [&] { return mu_phi->build(problem.lo, problem.hi); });
}

// ---------------------------------------------------------------------------
// Builtin scenarios

namespace {

// Adam(beta2 = 0.99) from 1e-2 decaying geometrically to 1e-5 over the phase.
AdamConfig desk_adam() {
  AdamConfig a;
  a.lr = 1e-2;
  a.beta2 = 0.99;
  a.lr_final = 1e-5;
  return a;
}

ScenarioConfig failure_1d() {
  ScenarioConfig c;
  c.name = "failure-1d";
  c.problem.chi_breakpoints = {0.0};
  c.problem.chi_values = {0.5, 1.0};
  c.problem.a_bar = {1.0};
  c.problem.f = {{0.0}, {{0.0}, {-2.0}}};
  c.training.phases = {{RiskKind::rm, 20000, desk_adam()}};
  return c;
}

}  // namespace

std::vector<std::string> builtin_scenario_names() {
  return {"failure-1d", "failure-1d-modified", "failure-1d-sv", "invariant-1d", "zero-source"};
}

ScenarioConfig builtin_scenario(const std::string& name) {
  ScenarioConfig c = failure_1d();
  if (name == "failure-1d") return c;
  if (name == "failure-1d-modified") {
    // RM solution of the modified equation: independent seeds, effective risk
    c.name = name;
    c.network.seed += 1;
    c.training.sample_seed += 1;
    c.training.phases = {{RiskKind::effective, 20000, desk_adam()}};
    return c;
  }
  if (name == "failure-1d-sv") {
    c.name = name;
    c.training.phases = {{RiskKind::supervised, 10000, desk_adam()}, {RiskKind::rm, 20000, desk_adam()}};
    return c;
  }
  if (name == "invariant-1d") {
    c.name = name;
    c.problem.f = {{0.0}, {{-1.0}, {-2.0}}};
    return c;
  }
  if (name == "zero-source") {
    c.name = name;
    c.problem.f = {{0.0}, {{0.0}, {0.0}}};
    c.training.phases = {{RiskKind::rm, 0, AdamConfig{}}};
    return c;
  }
  std::string known;
  for (const auto& n : builtin_scenario_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown builtin scenario \"" + name + "\" (known: " + known + ")");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json piecewise_json(const PiecewiseSpec& p) { return {{"breakpoints", p.breakpoints}, {"pieces", p.pieces}}; }

json optimizer_json(const OptimizerConfig& o) {
  if (const auto* a = std::get_if<AdamConfig>(&o))
    return {{"type", "adam"}, {"lr", a->lr}, {"beta1", a->beta1}, {"beta2", a->beta2}, {"eps", a->eps}, {"lr_final", a->lr_final}};
  return {{"type", "gd"}, {"lr", std::get<GdConfig>(o).lr}};
}

/// A JSON node plus its dotted path, for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  Node at(const char* key) const {
    require_object();
    if (!j_.contains(key)) throw ConfigError(child(key) + ": missing");
    return Node(j_.at(key), child(key));
  }

  template <class T>
  T get() const {
    try {
      return j_.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + ": " + e.what());
    }
  }

  template <class T>
  T get_or(const char* key, T fallback) const {
    return has(key) ? at(key).get<T>() : fallback;
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    require_object();
    for (const auto& [k, v] : j_.items()) {
      bool ok = false;
      for (const char* a : keys) ok = ok || k == a;
      if (!ok) throw ConfigError(child(k.c_str()) + ": unknown field");
    }
  }

  std::size_t size() const { return j_.size(); }
  Node operator[](std::size_t i) const { return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]"); }
  bool is_array() const { return j_.is_array(); }

 private:
  void require_object() const {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }
  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
};

PiecewiseSpec read_piecewise(const Node& n) {
  n.allow_only({"breakpoints", "pieces"});
  return {n.get_or<std::vector<double>>("breakpoints", {}), n.at("pieces").get<std::vector<std::vector<double>>>()};
}

OptimizerConfig read_optimizer(const Node& n) {
  const auto type = n.get_or<std::string>("type", "adam");
  if (type == "adam") {
    n.allow_only({"type", "lr", "beta1", "beta2", "eps", "lr_final"});
    AdamConfig a;
    a.lr = n.get_or("lr", a.lr);
    a.beta1 = n.get_or("beta1", a.beta1);
    a.beta2 = n.get_or("beta2", a.beta2);
    a.eps = n.get_or("eps", a.eps);
    a.lr_final = n.get_or("lr_final", a.lr_final);
    return a;
  }
  if (type == "gd") {
    n.allow_only({"type", "lr"});
    return GdConfig{n.get_or("lr", GdConfig{}.lr)};
  }
  throw ConfigError(n.path() + ".type: expected \"adam\" or \"gd\"");
}

template <class Fn>
auto enum_field(const Node& n, Fn&& parse) {
  try {
    return parse(n.get<std::string>());
  } catch (const ConfigError& e) {
    throw ConfigError(n.path() + ": " + e.what());
  }
}

}  // namespace

json to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["problem"] = {{"domain", {c.problem.lo, c.problem.hi}},
                  {"chi", {{"breakpoints", c.problem.chi_breakpoints}, {"values", c.problem.chi_values}}},
                  {"a_bar", c.problem.a_bar},
                  {"f", piecewise_json(c.problem.f)}};
  j["network"] = {{"widths", c.network.widths},
                  {"architecture", to_string(c.network.architecture)},
                  {"seed", c.network.seed},
                  {"skip_scale", c.network.skip_scale}};
  json phases = json::array();
  for (const PhaseSpec& p : c.training.phases)
    phases.push_back({{"kind", to_string(p.kind)}, {"steps", p.steps}, {"optimizer", optimizer_json(p.optimizer)}});
  j["training"] = {{"gamma", c.training.gamma},
                   {"n_int", c.training.n_int},
                   {"sample_mode", to_string(c.training.sample_mode)},
                   {"sample_seed", c.training.sample_seed},
                   {"resample_every", c.training.resample_every},
                   {"phases", phases}};
  j["solver"] = {{"rk_steps_per_interval", c.solver.rk_steps_per_interval},
                 {"force_ode", c.solver.force_ode},
                 {"kernel_tolerance", c.solver.kernel_tolerance}};
  j["outputs"] = {{"directory", c.outputs.directory}, {"grid_points", c.outputs.grid_points}};
  if (c.mu_phi) j["mu"] = {{"phi", piecewise_json(*c.mu_phi)}};
  return j;
}

ScenarioConfig scenario_from_json(const json& j) {
  const Node root(j, "");
  root.allow_only({"name", "problem", "network", "training", "solver", "outputs", "mu"});
  ScenarioConfig c;
  c.name = root.get_or<std::string>("name", "");

  const Node p = root.at("problem");
  p.allow_only({"domain", "chi", "a_bar", "f"});
  if (p.has("domain")) {
    const auto d = p.at("domain").get<std::vector<double>>();
    if (d.size() != 2) throw ConfigError("problem.domain: expected [lo, hi]");
    c.problem.lo = d[0];
    c.problem.hi = d[1];
  }
  const Node chi = p.at("chi");
  chi.allow_only({"breakpoints", "values"});
  c.problem.chi_breakpoints = chi.get_or<std::vector<double>>("breakpoints", {});
  c.problem.chi_values = chi.at("values").get<std::vector<double>>();
  c.problem.a_bar = p.get_or<std::vector<double>>("a_bar", {1.0});
  c.problem.f = read_piecewise(p.at("f"));

  if (root.has("network")) {
    const Node n = root.at("network");
    n.allow_only({"widths", "architecture", "seed", "skip_scale"});
    c.network.widths = n.get_or("widths", c.network.widths);
    if (n.has("architecture")) c.network.architecture = enum_field(n.at("architecture"), architecture_from_string);
    c.network.seed = n.get_or("seed", c.network.seed);
    c.network.skip_scale = n.get_or("skip_scale", c.network.skip_scale);
  }
  if (root.has("training")) {
    const Node t = root.at("training");
    t.allow_only({"gamma", "n_int", "sample_mode", "sample_seed", "resample_every", "phases"});
    c.training.gamma = t.get_or("gamma", c.training.gamma);
    c.training.n_int = t.get_or("n_int", c.training.n_int);
    if (t.has("sample_mode")) c.training.sample_mode = enum_field(t.at("sample_mode"), sample_mode_from_string);
    c.training.sample_seed = t.get_or("sample_seed", c.training.sample_seed);
    c.training.resample_every = t.get_or("resample_every", c.training.resample_every);
    if (t.has("phases")) {
      const Node ph = t.at("phases");
      if (!ph.is_array()) throw ConfigError(ph.path() + ": expected an array");
      for (std::size_t i = 0; i < ph.size(); ++i) {
        const Node e = ph[i];
        e.allow_only({"kind", "steps", "optimizer"});
        PhaseSpec s;
        s.kind = enum_field(e.at("kind"), risk_kind_from_string);
        s.steps = e.at("steps").get<std::size_t>();
        if (e.has("optimizer")) s.optimizer = read_optimizer(e.at("optimizer"));
        c.training.phases.push_back(s);
      }
    }
  }
  if (root.has("solver")) {
    const Node s = root.at("solver");
    s.allow_only({"rk_steps_per_interval", "force_ode", "kernel_tolerance"});
    c.solver.rk_steps_per_interval = s.get_or("rk_steps_per_interval", c.solver.rk_steps_per_interval);
    c.solver.force_ode = s.get_or("force_ode", c.solver.force_ode);
    c.solver.kernel_tolerance = s.get_or("kernel_tolerance", c.solver.kernel_tolerance);
  }
  if (root.has("outputs")) {
    const Node o = root.at("outputs");
    o.allow_only({"directory", "grid_points"});
    c.outputs.directory = o.get_or<std::string>("directory", "");
    c.outputs.grid_points = o.get_or("grid_points", c.outputs.grid_points);
  }
  if (root.has("mu")) {
    const Node m = root.at("mu");
    m.allow_only({"phi"});
    c.mu_phi = read_piecewise(m.at("phi"));
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario file " + path.string());
  out << to_json(config).dump(2) << '\n';
}

std::string config_hash(const ScenarioConfig& config) {
  const std::string s = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rmbias
