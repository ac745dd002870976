#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rmbias/exact_solve.hpp"
#include "rmbias/net_ad.hpp"
#include "rmbias/training.hpp"

namespace rmbias {

/// Piecewise polynomial as written in a scenario file.
struct PiecewiseSpec {
  std::vector<double> breakpoints;
  std::vector<std::vector<double>> pieces;

  PiecewiseFunction1D build(double lo, double hi) const;
  friend bool operator==(const PiecewiseSpec&, const PiecewiseSpec&) = default;
};

struct ProblemSpec {
  double lo = -1.0;
  double hi = 1.0;
  std::vector<double> chi_breakpoints;
  std::vector<double> chi_values{1.0};
  std::vector<double> a_bar{1.0};
  PiecewiseSpec f{{}, {{0.0}}};

  BVPProblem build() const;
  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

struct NetworkSpec {
  std::vector<int> widths{1, 64, 64, 64, 1};
  Architecture architecture = Architecture::plain;
  std::uint64_t seed = 7;
  double skip_scale = 1.0;

  NetworkParams initialize() const;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct PhaseSpec {
  RiskKind kind = RiskKind::rm;
  std::size_t steps = 0;
  OptimizerConfig optimizer = AdamConfig{};

  friend bool operator==(const PhaseSpec&, const PhaseSpec&) = default;
};

struct TrainingSpec {
  double gamma = 1.0;
  std::size_t n_int = 1000;
  SampleMode sample_mode = SampleMode::iid_uniform;
  std::uint64_t sample_seed = 11;
  std::size_t resample_every = 0;
  std::vector<PhaseSpec> phases;

  std::vector<TrainConfig> phase_configs() const;
  friend bool operator==(const TrainingSpec&, const TrainingSpec&) = default;
};

struct SolverSpec {
  int rk_steps_per_interval = 256;
  bool force_ode = false;
  double kernel_tolerance = kDefaultKernelTolerance;

  SolverOptions options() const { return {rk_steps_per_interval, force_ode}; }
  friend bool operator==(const SolverSpec&, const SolverSpec&) = default;
};

struct OutputSpec {
  std::string directory;  ///< relative to the output root; empty means the scenario name
  int grid_points = 1001;

  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

/// Everything one experiment needs. Serialized as JSON; see README for field names.
struct ScenarioConfig {
  std::string name;
  ProblemSpec problem;
  NetworkSpec network;
  TrainingSpec training;
  SolverSpec solver;
  OutputSpec outputs;
  std::optional<PiecewiseSpec> mu_phi;  ///< test function for `mu`

  /// Builds every component once; throws ConfigError with a field path on failure.
  void validate() const;
  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

std::vector<std::string> builtin_scenario_names();
ScenarioConfig builtin_scenario(const std::string& name);

nlohmann::json to_json(const ScenarioConfig& config);
ScenarioConfig scenario_from_json(const nlohmann::json& j);

ScenarioConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path);

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

}  // namespace rmbias
