#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "taxflow/taxflow.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitProperty = 2;
constexpr int kExitRuntime = 3;

int exit_code(taxflow_status st) {
  switch (st) {
    case TAXFLOW_OK: return kExitOk;
    case TAXFLOW_INVALID_ARGUMENT:
    case TAXFLOW_VALIDATION: return kExitValidation;
    case TAXFLOW_PROPERTY_VIOLATION: return kExitProperty;
    default: return kExitRuntime;
  }
}

struct Options {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> alpha;
  std::string fixture;
  std::string model;
  std::string rule;
  std::optional<std::size_t> levels, batch, threads, steps;
  std::vector<std::string> sets;
  bool print_config = false;
};

struct Override {
  std::string key, value;
};

std::vector<Override> overrides(const Options& o) {
  std::vector<Override> out;
  if (o.seed) out.push_back({"seed", std::to_string(*o.seed)});
  if (o.alpha) out.push_back({"alpha", CLI::detail::to_string(*o.alpha)});
  if (!o.fixture.empty()) {
    out.push_back({"strategy.kind", "fixture"});
    out.push_back({"strategy.fixture", o.fixture});
  }
  if (!o.model.empty()) out.push_back({"model.name", o.model});
  if (!o.rule.empty()) {
    out.push_back({"strategy.kind", "feedback"});
    out.push_back({"strategy.rule", o.rule});
  }
  if (o.levels) out.push_back({"convergence.levels", std::to_string(*o.levels)});
  if (o.batch) out.push_back({"batch", std::to_string(*o.batch)});
  if (o.threads) out.push_back({"threads", std::to_string(*o.threads)});
  if (o.steps) out.push_back({"model.steps", std::to_string(*o.steps)});
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    out.push_back({s.substr(0, eq), eq == std::string::npos ? "" : s.substr(eq + 1)});
  }
  return out;
}

int run(const std::string& experiment, const Options& o) {
  taxflow_config* cfg = nullptr;
  taxflow_status st = o.config_file.empty() ? taxflow_config_default(experiment.c_str(), &cfg)
                                            : taxflow_config_load(o.config_file.c_str(), &cfg);
  if (st != TAXFLOW_OK) {
    std::fprintf(stderr, "error: %s\n", taxflow_last_error());
    return exit_code(st);
  }
  if (experiment != taxflow_config_experiment(cfg)) {
    std::fprintf(stderr, "error: %s declares experiment '%s' but the subcommand is '%s'\n", o.config_file.c_str(),
                 taxflow_config_experiment(cfg), experiment.c_str());
    taxflow_config_free(cfg);
    return kExitValidation;
  }
  for (const auto& ov : overrides(o)) {
    st = taxflow_config_set(cfg, ov.key.c_str(), ov.value.c_str());
    if (st != TAXFLOW_OK) {
      std::fprintf(stderr, "error: %s\n", taxflow_last_error());
      taxflow_config_free(cfg);
      return exit_code(st);
    }
  }
  st = taxflow_config_validate(cfg);
  if (st != TAXFLOW_OK) {
    std::fprintf(stderr, "error: %s\n", taxflow_last_error());
    taxflow_config_free(cfg);
    return exit_code(st);
  }
  if (o.print_config) {
    std::fputs(taxflow_config_yaml(cfg), stdout);
    taxflow_config_free(cfg);
    return kExitOk;
  }
  const std::string out_dir = o.out.empty() ? std::string(taxflow_config_output(cfg)) : o.out;
  taxflow_report* report = nullptr;
  st = taxflow_run(cfg, out_dir.c_str(), &report);
  taxflow_config_free(cfg);
  if (report != nullptr) {
    std::fputs(taxflow_report_summary(report), stdout);
    taxflow_report_free(report);
  }
  if (st != TAXFLOW_OK) std::fprintf(stderr, "error: %s\n", taxflow_last_error());
  return exit_code(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capital gains tax flows under exact tax basis with wash sales"};
  app.set_version_flag("--version", std::string(taxflow_version()));
  app.require_subcommand(1);

  Options opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ledger", "Lot ledger and tax flow of a fixture, explicit or generated strategy"},
      {"simulate", "Monte Carlo tax and wealth of a strategy on generated paths"},
      {"compare-dividends", "Wealth and tax with dividends versus the dividend-free twin market"},
      {"efficient", "Closed-form tax flow of a price feedback strategy versus the grid engine"},
      {"converge", "Engine versus closed form under grid refinement"},
      {"verify", "Run the invariant suite; exit 2 on any violation"},
  };
  std::string chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config_file, "YAML configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "Master seed");
    sub->add_option("--out", opts.out, "Output directory (overrides the config)");
    sub->add_option("--alpha", opts.alpha, "Tax rate in (0, 1)");
    sub->add_option("--fixture", opts.fixture, "Named fixture (figure2, figure3)");
    sub->add_option("--model", opts.model, "Price model (crr, gbm, jump_diffusion)");
    sub->add_option("--g", opts.rule, "Feedback rule (linear, power, tabulated)");
    sub->add_option("--levels", opts.levels, "Refinement levels");
    sub->add_option("--batch", opts.batch, "Paths, models or instances per batch");
    sub->add_option("--threads", opts.threads, "Worker threads");
    sub->add_option("--steps", opts.steps, "Grid steps of generated paths");
    sub->add_option("--set", opts.sets, "Any config key, as key=value (repeatable)");
    sub->add_flag("--print-config", opts.print_config, "Print the effective configuration and exit");
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  try {
    return run(chosen, opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
