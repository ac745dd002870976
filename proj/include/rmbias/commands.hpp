#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rmbias/analysis.hpp"
#include "rmbias/scenario.hpp"

namespace rmbias {

/// Environment variable naming the directory that scenario output directories live under.
inline constexpr const char* kOutputRootEnv = "RMBIAS_OUTPUT_ROOT";

/// `override_dir` if given, else $RMBIAS_OUTPUT_ROOT (or ".") / outputs.directory (or the scenario name).
std::filesystem::path resolve_output_dir(const ScenarioConfig& config,
                                         const std::optional<std::filesystem::path>& override_dir);

struct SolveOutcome {
  SolutionFunction u;
  SolutionFunction utilde;
  KernelVerdict kernel;
  std::vector<double> mu_per_jump;  ///< mu with phi = utilde, jump by jump
};

/// Writes u.csv, utilde.csv and rm_transform.json.
SolveOutcome cmd_solve(const ScenarioConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Prints the verdict and atoms; writes kernel_check.json.
KernelVerdict cmd_kernel_check(const ScenarioConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// mu over the whole domain for the scenario's mu.phi, an explicit polynomial, or utilde by default.
double cmd_mu(const ScenarioConfig& config, const std::optional<std::vector<double>>& phi_coefficients,
              std::ostream& log);

/// Metrics of the network at the end of one phase.
struct PhaseMetrics {
  RiskKind kind;
  RiskRecord final_risk;
  double effective_risk;  ///< effective empirical risk on the scenario's sample set
  double linf_to_u, l2_to_u, h1_to_u;
  double linf_to_utilde, l2_to_utilde, h1_to_utilde;
  double rel_l2_to_u, rel_l2_to_utilde;
};

struct TrainOutcome {
  std::vector<RunRecord> runs;
  std::vector<PhaseMetrics> phases;
  NetworkParams initial;
  NetworkParams final_params;
};

/// Runs the phase plan. Writes risk_curve.csv, checkpoint_init.json, checkpoint_phase<k>_<kind>.json,
/// checkpoint_final.json, solution_samples.csv and summary.json.
TrainOutcome cmd_train(const ScenarioConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

struct Table1Options {
  bool exact_only = false;
  bool train_inline = false;
  std::optional<std::filesystem::path> rm_checkpoint;        ///< u_theta; default <out>/checkpoint_final.json
  std::optional<std::filesystem::path> modified_checkpoint;  ///< utilde_theta; part (d) needs it
};

/// The modified-equation companion of a scenario: effective risk and shifted seeds.
ScenarioConfig modified_companion(const ScenarioConfig& config);

/// Writes table1.md, table1.csv and deviation.csv.
std::vector<Table1Row> cmd_table1(const ScenarioConfig& config, const std::filesystem::path& out_dir,
                                  const Table1Options& options, std::ostream& log);

struct GradcheckCase {
  std::vector<int> widths;
  Architecture architecture;
  std::uint64_t seed;
  RiskKind kind;
  double max_rel_error;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double max_rel_error = 0.0;
  double tolerance = 1e-5;
  bool passed() const { return max_rel_error <= tolerance; }
};

/// Central finite differences against grad_params on nets up to width 8 and depth 4,
/// `samples` interior points, seeds 0..seeds-1. Per-coordinate error is
/// |g - fd| / max(1, |g|, |fd|).
GradcheckReport cmd_gradcheck(const ScenarioConfig& config, int seeds, std::size_t samples, double step,
                              std::ostream& log);

}  // namespace rmbias
