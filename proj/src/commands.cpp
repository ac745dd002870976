#include "rmbias/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <random>

#include "json.hpp"
#include "rmbias/errors.hpp"

namespace rmbias {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path resolve_output_dir(const ScenarioConfig& config, const std::optional<fs::path>& override_dir) {
  if (override_dir) return *override_dir;
  const char* root = std::getenv(kOutputRootEnv);
  const fs::path base = (root && *root) ? fs::path(root) : fs::path(".");
  const std::string leaf = !config.outputs.directory.empty() ? config.outputs.directory
                           : !config.name.empty()            ? config.name
                                                             : std::string("scenario");
  return base / leaf;
}

namespace {

std::ofstream open_output(const fs::path& dir, const std::string& file) {
  fs::create_directories(dir);
  std::ofstream os(dir / file);
  if (!os) throw ConfigError("cannot write " + (dir / file).string());
  return os;
}

std::string provenance_comment(const ScenarioConfig& c) {
  return "scenario=" + (c.name.empty() ? std::string("-") : c.name) + " config_hash=" + config_hash(c);
}

json atoms_json(const DiracCombination& g) {
  json a = json::array();
  for (const DiracAtom& d : g.atoms) a.push_back({{"location", d.location}, {"weight", d.weight}});
  return a;
}

const char* provenance_name(Provenance p) { return p == Provenance::closed_form ? "closed_form" : "ode"; }

void print_verdict(const KernelVerdict& v, std::ostream& log) {
  log << (v.in_kernel ? "Tf = f: f lies in Ker(T - I), no deviation\n"
                      : "Tf != f: f is outside Ker(T - I), u and utilde deviate\n");
  log << "  max |weight| = " << v.max_abs_weight << " (tolerance " << v.tolerance << ")\n";
  for (const DiracAtom& a : v.per_jump.atoms) log << "  atom at x = " << a.location << ": weight " << a.weight << '\n';
}

}  // namespace

SolveOutcome cmd_solve(const ScenarioConfig& config, const fs::path& out_dir, std::ostream& log) {
  config.validate();
  const BVPProblem problem = config.problem.build();
  const SolverOptions opts = config.solver.options();
  SolveOutcome out{solve_original(problem, opts), solve_modified(problem, opts),
                   kernel_membership(problem, config.solver.kernel_tolerance, opts), {}};
  const SolutionFunction& ut = out.utilde;
  out.mu_per_jump = mu_contributions(jump_set(problem.decomp()), problem.decomp().a_bar(),
                                     [&](double x) { return ut.derivative(x); });

  const std::string comment = provenance_comment(config);
  {
    auto os = open_output(out_dir, "u.csv");
    out.u.write_csv(os, config.outputs.grid_points, comment);
  }
  {
    auto os = open_output(out_dir, "utilde.csv");
    out.utilde.write_csv(os, config.outputs.grid_points, comment);
  }
  json mu = json::array();
  const auto jumps = jump_set(problem.decomp());
  double mu_total = 0.0;
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    mu.push_back({{"location", jumps[k].location}, {"value", out.mu_per_jump[k]}});
    mu_total += out.mu_per_jump[k];
  }
  json j;
  j["scenario"] = config.name;
  j["config_hash"] = config_hash(config);
  j["atoms"] = atoms_json(out.kernel.per_jump);
  j["kernel"] = {{"in_kernel", out.kernel.in_kernel},
                 {"tolerance", out.kernel.tolerance},
                 {"max_abs_weight", out.kernel.max_abs_weight}};
  j["mu"] = {{"phi", "utilde"}, {"per_jump", mu}, {"total", mu_total}};
  j["h_minus_one_norm"] = h_minus_one_norm(out.kernel.per_jump, problem.domain_lo(), problem.domain_hi());
  j["provenance"] = {{"u", provenance_name(out.u.provenance())}, {"utilde", provenance_name(out.utilde.provenance())}};
  open_output(out_dir, "rm_transform.json") << j.dump(2) << '\n';

  log << "solved " << (config.name.empty() ? "scenario" : config.name) << " -> " << out_dir.string() << '\n';
  print_verdict(out.kernel, log);
  log << "  mu(utilde) = " << mu_total << '\n';
  return out;
}

KernelVerdict cmd_kernel_check(const ScenarioConfig& config, const fs::path& out_dir, std::ostream& log) {
  config.validate();
  const BVPProblem problem = config.problem.build();
  const KernelVerdict v = kernel_membership(problem, config.solver.kernel_tolerance, config.solver.options());
  print_verdict(v, log);
  json j;
  j["scenario"] = config.name;
  j["config_hash"] = config_hash(config);
  j["in_kernel"] = v.in_kernel;
  j["tolerance"] = v.tolerance;
  j["max_abs_weight"] = v.max_abs_weight;
  j["atoms"] = atoms_json(v.per_jump);
  open_output(out_dir, "kernel_check.json") << j.dump(2) << '\n';
  return v;
}

double cmd_mu(const ScenarioConfig& config, const std::optional<std::vector<double>>& phi_coefficients,
              std::ostream& log) {
  config.validate();
  const BVPProblem problem = config.problem.build();
  ScalarFunction phi_prime;
  std::string label;
  if (phi_coefficients) {
    const Polynomial d = Polynomial(*phi_coefficients).derivative();
    phi_prime = [d](double x) { return d(x); };
    label = "explicit polynomial";
  } else if (config.mu_phi) {
    const PiecewiseFunction1D phi = config.mu_phi->build(problem.domain_lo(), problem.domain_hi());
    phi_prime = [phi](double x) { return phi.evaluate(x, 1); };
    label = "mu.phi";
  } else {
    const SolutionFunction ut = solve_modified(problem, config.solver.options());
    phi_prime = [ut](double x) { return ut.derivative(x); };
    label = "utilde";
  }
  const auto jumps = jump_set(problem.decomp());
  const auto parts = mu_contributions(jumps, problem.decomp().a_bar(), phi_prime);
  double total = 0.0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    log << "  jump at x = " << jumps[k].location << ": " << parts[k] << '\n';
    total += parts[k];
  }
  log << "mu(Omega; chi, a_bar, phi) = " << total << "  [phi = " << label << "]\n";
  return total;
}

namespace {

PhaseMetrics measure(const NetworkParams& params, const RunRecord& run, const BVPProblem& problem,
                     const SolutionFunction& u, const SolutionFunction& ut, const SampleSet& samples, double gamma) {
  const JetFunction net = as_function(params);
  const JetFunction fu = u.as_function(), fut = ut.as_function();
  const auto& knots = problem.knots();
  PhaseMetrics m{};
  m.kind = run.config.risk_kind;
  m.final_risk = run.final_risk();
  m.effective_risk = empirical_risk(net, problem, samples, RiskKind::effective, gamma).total;
  const JetFunction du = difference(net, fu), dut = difference(net, fut);
  m.linf_to_u = norm(du, NormKind::Linf, knots);
  m.l2_to_u = norm(du, NormKind::L2, knots);
  m.h1_to_u = norm(du, NormKind::H1, knots);
  m.linf_to_utilde = norm(dut, NormKind::Linf, knots);
  m.l2_to_utilde = norm(dut, NormKind::L2, knots);
  m.h1_to_utilde = norm(dut, NormKind::H1, knots);
  m.rel_l2_to_u = m.l2_to_u / norm(fu, NormKind::L2, knots);
  m.rel_l2_to_utilde = m.l2_to_utilde / norm(fut, NormKind::L2, knots);
  return m;
}

json metrics_json(const PhaseMetrics& m) {
  return {{"kind", to_string(m.kind)},
          {"final_risk", {{"total", m.final_risk.total}, {"interior", m.final_risk.interior},
                          {"boundary", m.final_risk.boundary}}},
          {"effective_empirical_risk", m.effective_risk},
          {"to_u", {{"Linf", m.linf_to_u}, {"L2", m.l2_to_u}, {"H1", m.h1_to_u}, {"relative_L2", m.rel_l2_to_u}}},
          {"to_utilde",
           {{"Linf", m.linf_to_utilde}, {"L2", m.l2_to_utilde}, {"H1", m.h1_to_utilde},
            {"relative_L2", m.rel_l2_to_utilde}}}};
}

void write_checkpoint(const NetworkParams& p, const fs::path& dir, const std::string& file) {
  auto os = open_output(dir, file);
  save_checkpoint(p, os);
}

NetworkParams read_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("checkpoint " + path.string() + " not found");
  return load_checkpoint(in);
}

}  // namespace

TrainOutcome cmd_train(const ScenarioConfig& config, const fs::path& out_dir, std::ostream& log) {
  config.validate();
  const BVPProblem problem = config.problem.build();
  const SolverOptions opts = config.solver.options();
  const SolutionFunction u = solve_original(problem, opts);
  const SolutionFunction ut = solve_modified(problem, opts);
  const auto& knots = problem.knots();
  const SampleSet samples =
      draw_samples(problem.domain_lo(), problem.domain_hi(), config.training.n_int, config.training.sample_mode,
                   config.training.sample_seed, std::vector<double>(knots.begin() + 1, knots.end() - 1));

  TrainOutcome out;
  out.initial = config.network.initialize();
  write_checkpoint(out.initial, out_dir, "checkpoint_init.json");

  const std::string comment = provenance_comment(config);
  auto curve = open_output(out_dir, "risk_curve.csv");
  curve.precision(17);
  curve << "# " << comment << '\n' << "phase,kind,step,total,interior,boundary\n";

  NetworkParams current = out.initial;
  const auto phases = config.training.phase_configs();
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const TrainConfig& cfg = phases[k];
    log << "phase " << k << " (" << to_string(cfg.risk_kind) << ", " << cfg.steps << " steps)" << std::flush;
    RunRecord run = train(current, problem, cfg.risk_kind == RiskKind::supervised ? &u : nullptr, cfg);
    for (const RiskRecord& r : run.risks)
      curve << k << ',' << to_string(cfg.risk_kind) << ',' << r.step << ',' << r.total << ',' << r.interior << ','
            << r.boundary << '\n';
    current = run.final_params;
    write_checkpoint(current, out_dir, "checkpoint_phase" + std::to_string(k) + "_" + to_string(cfg.risk_kind) + ".json");
    PhaseMetrics m = measure(current, run, problem, u, ut, samples, config.training.gamma);
    log << ": risk " << m.final_risk.total << ", rel L2 to u " << m.rel_l2_to_u << ", rel L2 to utilde "
        << m.rel_l2_to_utilde << " [" << run.wall_seconds << " s]\n";
    out.phases.push_back(m);
    out.runs.push_back(std::move(run));
  }
  out.final_params = current;
  write_checkpoint(current, out_dir, "checkpoint_final.json");

  {
    auto os = open_output(out_dir, "solution_samples.csv");
    os.precision(17);
    os << "# " << comment << '\n' << "x,value,derivative\n";
    const int n = config.outputs.grid_points;
    for (int i = 0; i < n; ++i) {
      const double x = i + 1 == n ? problem.domain_hi()
                                  : problem.domain_lo() + (problem.domain_hi() - problem.domain_lo()) * i / (n - 1);
      const Jet2 j = forward_jet(current, x);
      os << x << ',' << j.value << ',' << j.d1 << '\n';
    }
  }
  json s;
  s["scenario"] = config.name;
  s["config_hash"] = config_hash(config);
  s["phases"] = json::array();
  for (std::size_t k = 0; k < out.phases.size(); ++k) {
    json p = metrics_json(out.phases[k]);
    p["steps"] = out.runs[k].config.steps;
    p["wall_seconds"] = out.runs[k].wall_seconds;
    s["phases"].push_back(p);
  }
  if (out.phases.empty()) {
    RunRecord none;
    none.config.risk_kind = RiskKind::rm;
    none.risks.push_back({0, 0.0, 0.0, 0.0});
    s["initial"] = metrics_json(measure(current, none, problem, u, ut, samples, config.training.gamma));
  }
  open_output(out_dir, "summary.json") << s.dump(2) << '\n';
  return out;
}

ScenarioConfig modified_companion(const ScenarioConfig& config) {
  ScenarioConfig c = config;
  c.name = config.name + "-modified";
  c.network.seed += 1;
  c.training.sample_seed += 1;
  for (PhaseSpec& p : c.training.phases)
    if (p.kind == RiskKind::rm) p.kind = RiskKind::effective;
  return c;
}

std::vector<Table1Row> cmd_table1(const ScenarioConfig& config, const fs::path& out_dir, const Table1Options& options,
                                  std::ostream& log) {
  config.validate();
  const BVPProblem problem = config.problem.build();
  const SolverOptions opts = config.solver.options();
  const SolutionFunction u = solve_original(problem, opts);
  const SolutionFunction ut = solve_modified(problem, opts);
  std::vector<NamedFunction> fns{{kExact, u.as_function()}, {kModified, ut.as_function()}};

  if (!options.exact_only) {
    std::optional<NetworkParams> rm, mod;
    if (options.train_inline) {
      rm = cmd_train(config, out_dir / "u_theta", log).final_params;
      mod = cmd_train(modified_companion(config), out_dir / "utilde_theta", log).final_params;
    } else {
      const fs::path rm_path = options.rm_checkpoint.value_or(out_dir / "checkpoint_final.json");
      if (!fs::exists(rm_path))
        throw ConfigError("table1: checkpoint " + rm_path.string() +
                          " not found; run `rmbias train` for this scenario, pass --rm-checkpoint, use --train to "
                          "train inline, or --exact-only for part (a)");
      rm = read_checkpoint(rm_path);
      if (options.modified_checkpoint) {
        if (!fs::exists(*options.modified_checkpoint))
          throw ConfigError("table1: modified checkpoint " + options.modified_checkpoint->string() + " not found");
        mod = read_checkpoint(*options.modified_checkpoint);
      }
    }
    fns.push_back({kRmSolution, as_function(*rm)});
    if (mod) fns.push_back({kRmModifiedSolution, as_function(*mod)});
  }

  const DeviationReport report = deviation_report(fns, problem.knots());
  const auto rows = table1_rows(report);
  const std::string comment = provenance_comment(config);
  {
    auto os = open_output(out_dir, "table1.csv");
    write_table1_csv(rows, os, comment);
  }
  {
    auto os = open_output(out_dir, "table1.md");
    os << "<!-- " << comment << " -->\n";
    write_table1_markdown(rows, os);
  }
  {
    auto os = open_output(out_dir, "deviation.csv");
    report.write_csv(os, comment);
  }
  write_table1_markdown(rows, log);
  return rows;
}

GradcheckReport cmd_gradcheck(const ScenarioConfig& config, int seeds, std::size_t samples, double step,
                              std::ostream& log) {
  config.validate();
  const BVPProblem problem = config.problem.build();
  const SolutionFunction u = solve_original(problem, config.solver.options());
  const auto& knots = problem.knots();
  const std::vector<double> breakpoints(knots.begin() + 1, knots.end() - 1);

  struct Net {
    std::vector<int> widths;
    Architecture arch;
  };
  const std::vector<Net> nets{{{1, 2, 1}, Architecture::plain},
                              {{1, 8, 1}, Architecture::plain},
                              {{1, 4, 4, 1}, Architecture::plain},
                              {{1, 8, 8, 8, 1}, Architecture::plain},
                              {{1, 8, 8, 8, 1}, Architecture::resnet}};
  GradcheckReport report;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto useed = static_cast<std::uint64_t>(seed);
    const SampleSet s = draw_samples(problem.domain_lo(), problem.domain_hi(), samples, SampleMode::iid_uniform,
                                     useed, breakpoints);
    for (const Net& n : nets) {
      NetworkParams p = init_xavier(n.widths, n.arch, useed);
      // non-zero biases so every adjoint path is exercised
      std::mt19937_64 rng(useed + 1000);
      std::normal_distribution<double> normal(0.0, 0.5);
      for (auto& b : p.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = normal(rng);

      for (RiskKind kind : {RiskKind::rm, RiskKind::supervised}) {
        const CompiledLoss loss = compile_risk(problem, &u, s, kind, config.training.gamma);
        const Eigen::VectorXd g = evaluate_loss(p, loss, true).gradient;
        Eigen::VectorXd theta = p.flatten();
        NetworkParams probe = p;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
          const double keep = theta[i];
          theta[i] = keep + step;
          probe.assign(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
          const double up = evaluate_loss(probe, loss, false).total;
          theta[i] = keep - step;
          probe.assign(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
          const double down = evaluate_loss(probe, loss, false).total;
          theta[i] = keep;
          const double fd = (up - down) / (2.0 * step);
          worst = std::max(worst, std::abs(g[i] - fd) / std::max({1.0, std::abs(g[i]), std::abs(fd)}));
        }
        report.cases.push_back({n.widths, n.arch, useed, kind, worst});
        report.max_rel_error = std::max(report.max_rel_error, worst);
        log << "seed " << seed << " widths [";
        for (std::size_t w = 0; w < n.widths.size(); ++w) log << (w ? "," : "") << n.widths[w];
        log << "] " << to_string(n.arch) << " " << to_string(kind) << ": max rel error " << worst << '\n';
      }
    }
  }
  log << (report.passed() ? "PASS" : "FAIL") << ": max rel error " << report.max_rel_error << " (tolerance "
      << report.tolerance << ")\n";
  return report;
}

}  // namespace rmbias
