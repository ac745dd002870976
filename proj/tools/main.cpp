#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rmbias/commands.hpp"
#include "rmbias/errors.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string scenario;
  std::string config_file;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  auto* s = cmd->add_option("-s,--scenario", c.scenario, "builtin scenario name");
  auto* f = cmd->add_option("-c,--config", c.config_file, "scenario config file (JSON)");
  s->excludes(f);
  cmd->add_option("-o,--out", c.out, "output directory (overrides $RMBIAS_OUTPUT_ROOT/<outputs.directory>)");
}

rmbias::ScenarioConfig load(const Common& c) {
  if (!c.config_file.empty()) return rmbias::load_scenario(c.config_file);
  if (!c.scenario.empty()) return rmbias::builtin_scenario(c.scenario);
  throw rmbias::ConfigError("pass --scenario <name> or --config <file>");
}

std::filesystem::path out_dir(const rmbias::ScenarioConfig& config, const Common& c) {
  return rmbias::resolve_output_dir(config, c.out.empty() ? std::nullopt
                                                          : std::optional<std::filesystem::path>(c.out));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deviation of residual-minimising solutions for elliptic problems with discontinuous coefficients"};
  app.require_subcommand(1);

  Common solve_opts, kernel_opts, mu_opts, train_opts, table_opts, grad_opts, dump_opts;

  auto* solve = app.add_subcommand("solve", "exact solutions u, utilde and the RM-transformation");
  add_common(solve, solve_opts);

  auto* kernel = app.add_subcommand("kernel-check", "report whether Tf = f");
  add_common(kernel, kernel_opts);

  auto* mu = app.add_subcommand("mu", "evaluate mu for the config's test function (default utilde)");
  add_common(mu, mu_opts);
  std::vector<double> phi;
  mu->add_option("--phi", phi, "polynomial test function, ascending coefficients");

  auto* train = app.add_subcommand("train", "run the scenario's phase plan");
  add_common(train, train_opts);

  auto* table = app.add_subcommand("table1", "deviation and relative deviation table");
  add_common(table, table_opts);
  rmbias::Table1Options t1;
  std::string rm_ckpt, mod_ckpt;
  table->add_flag("--exact-only", t1.exact_only, "only part (a), from the exact solutions");
  table->add_flag("--train", t1.train_inline, "train u_theta and utilde_theta inline");
  table->add_option("--rm-checkpoint", rm_ckpt, "checkpoint of u_theta");
  table->add_option("--modified-checkpoint", mod_ckpt, "checkpoint of utilde_theta (part d)");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference audit of the analytic gradient");
  add_common(grad, grad_opts);
  int seeds = 5;
  std::size_t samples = 16;
  double step = 1e-6;
  grad->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);
  grad->add_option("--samples", samples, "interior samples")->check(CLI::PositiveNumber);
  grad->add_option("--step", step, "central difference step")->check(CLI::PositiveNumber);

  auto* list = app.add_subcommand("scenarios", "list builtin scenarios");
  auto* dump = app.add_subcommand("dump-config", "print a scenario config as JSON");
  add_common(dump, dump_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& n : rmbias::builtin_scenario_names()) std::cout << n << '\n';
    } else if (*dump) {
      std::cout << rmbias::to_json(load(dump_opts)).dump(2) << '\n';
    } else if (*solve) {
      const auto cfg = load(solve_opts);
      rmbias::cmd_solve(cfg, out_dir(cfg, solve_opts), std::cout);
    } else if (*kernel) {
      const auto cfg = load(kernel_opts);
      rmbias::cmd_kernel_check(cfg, out_dir(cfg, kernel_opts), std::cout);
    } else if (*mu) {
      const auto cfg = load(mu_opts);
      rmbias::cmd_mu(cfg, phi.empty() ? std::nullopt : std::optional<std::vector<double>>(phi), std::cout);
    } else if (*train) {
      const auto cfg = load(train_opts);
      rmbias::cmd_train(cfg, out_dir(cfg, train_opts), std::cout);
    } else if (*table) {
      const auto cfg = load(table_opts);
      if (!rm_ckpt.empty()) t1.rm_checkpoint = rm_ckpt;
      if (!mod_ckpt.empty()) t1.modified_checkpoint = mod_ckpt;
      rmbias::cmd_table1(cfg, out_dir(cfg, table_opts), t1, std::cout);
    } else if (*grad) {
      const auto report = rmbias::cmd_gradcheck(load(grad_opts), seeds, samples, step, std::cout);
      if (!report.passed()) return kExitNumerical;
    }
  } catch (const rmbias::NumericalAbort& e) {
    std::cerr << "numerical abort at step " << e.step() << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const rmbias::EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {  // ConfigError, EllipticityError
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
