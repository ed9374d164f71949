#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace taxflow {

enum class ExperimentKind { Ledger, Simulate, CompareDividends, Efficient, Converge, Verify };

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment_kind(const std::string& name);

struct ModelConfig {
  std::string name = "crr";  // crr | gbm | jump_diffusion
  double s0 = 100.0;
  double mu = 0.0;
  double sigma = 0.2;
  std::size_t steps = 50;
  double horizon = 1.0;
  double jump_intensity = 0.0;
  double jump_up = 0.1;
  double jump_down = 0.1;
  double jump_p_up = 0.5;
};

struct StrategyConfig {
  std::string kind = "feedback";  // fixture | explicit | feedback
  std::string fixture = "figure2";
  std::vector<double> positions;  // explicit: shares after trading at t = 0..T
  std::vector<double> prices;     // explicit: optional price path on the integer grid
  std::string rule = "linear";    // linear | power | tabulated
  double slope = 1.0;
  double intercept = 0.0;
  double scale = 1.0;
  double exponent = 1.0;
  std::vector<double> table_prices;
  std::vector<double> table_shares;
};

struct DividendConfig {
  double step_return = 0.05;
  double probability = 0.2;
  double max_yield = 0.3;
  double max_shares = 6.0;
};

struct ConvergenceConfig {
  std::size_t levels = 6;
  std::size_t base_steps = 50;
  std::size_t coarse_steps = 8;
  std::size_t fine_factor = 8;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Ledger;
  double alpha = 0.25;
  double rate = 0.0;
  double v0 = 1000.0;
  std::uint64_t seed = 1;
  std::size_t batch = 100;
  std::size_t threads = 1;
  std::string output = "out";
  ModelConfig model;
  StrategyConfig strategy;
  DividendConfig dividends;
  ConvergenceConfig convergence;
};

/// Parses a YAML document. Every problem (unknown key, wrong type, value out
/// of range) is collected with its line number; a nonempty list raises a
/// Validation error carrying all of them.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);
/// Defaults for one experiment kind, as if parsed from `experiment: <kind>`.
ExperimentConfig default_config(ExperimentKind kind);

/// Sets one dotted key (e.g. "model.sigma") from a YAML scalar or flow
/// sequence and applies that key's own range check. Cross-field checks are
/// left to require_valid, so related keys can be set in any order.
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Cross-field checks (alpha in (0,1), batch >= 1, fixture exists, ...).
std::vector<std::string> validate_config(const ExperimentConfig& config);
/// Throws a Validation error listing every problem found by validate_config.
void require_valid(const ExperimentConfig& config);

/// Effective configuration as YAML and as JSON.
std::string config_yaml(const ExperimentConfig& config);
std::string config_json(const ExperimentConfig& config);

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t instances = 0;
  double worst = 0.0;  // largest violation margin observed (0 when none)
  std::string detail;
};

/// The invariant suite behind `verify`; `batch` random instances per check.
std::vector<CheckResult> run_invariant_suite(std::uint64_t seed, std::size_t batch, std::size_t threads);

struct OutputFile {
  std::string name;
  std::string sha256;
  std::size_t bytes = 0;
};

struct RunReport {
  int exit_code = 0;             // 0 ok, 2 property violation
  std::string summary_json;      // also written to summary.json
  std::vector<OutputFile> files;  // everything written, manifest excluded
  std::vector<std::string> messages;
};

/// Runs the configured experiment and writes CSV reports, summary.json and
/// manifest.json into out_dir (created if needed). Outputs depend only on the
/// configuration and the library version.
RunReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

std::string sha256_hex(const std::string& bytes);
const char* library_version();

}  // namespace taxflow
