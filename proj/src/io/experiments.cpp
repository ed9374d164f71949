#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <json.hpp>

#include <fmt/format.h>

#include "taxflow/cli_io.hpp"
#include "taxflow/efficient_strategies.hpp"
#include "taxflow/error.hpp"
#include "taxflow/fixtures.hpp"
#include "taxflow/lot_ledger.hpp"
#include "taxflow/parallel.hpp"
#include "taxflow/rng.hpp"
#include "taxflow/tax_flow.hpp"
#include "taxflow/wealth.hpp"

namespace taxflow {

const char* library_version() { return "1.0.0"; }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::Runtime, "sha256: digest computation failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

namespace {

using json = nlohmann::ordered_json;

std::string num(double v) { return fmt::format("{:.17g}", v); }

class Writer {
 public:
  explicit Writer(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(ErrorCode::Runtime, fmt::format("cannot create output directory '{}': {}", dir_.string(), ec.message()));
  }

  void write(const std::string& name, const std::string& content, bool listed = true) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) fail(ErrorCode::Runtime, fmt::format("cannot write '{}'", (dir_ / name).string()));
    if (listed) files_.push_back({name, sha256_hex(content), content.size()});
  }

  const std::vector<OutputFile>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<OutputFile> files_;
};

FeedbackRule make_rule(const StrategyConfig& s) {
  if (s.rule == "power") return FeedbackRule::power(s.scale, s.exponent);
  if (s.rule == "tabulated") return FeedbackRule::tabulated(s.table_prices, s.table_shares);
  return FeedbackRule::linear(s.slope, s.intercept);
}

PricePath make_path(const ModelConfig& m, std::size_t steps, std::uint64_t seed) {
  if (m.name == "gbm") return gen_gbm(m.s0, m.mu, m.sigma, steps, m.horizon, seed);
  if (m.name == "jump_diffusion")
    return gen_jump_diffusion(m.s0, m.mu, m.sigma, m.jump_intensity, JumpLaw{m.jump_up, m.jump_down, m.jump_p_up},
                              steps, m.horizon, seed)
        .path;
  return gen_crr(m.s0, m.sigma, steps, m.horizon, seed);
}

std::vector<double> random_positions(std::size_t count, double max_shares, std::uint64_t seed) {
  Rng rng(seed, 17);
  std::vector<double> out(count);
  for (double& v : out) v = static_cast<double>(rng.uniform_int(0, static_cast<long>(max_shares)));
  return out;
}

ElementaryStrategy strategy_on(const ExperimentConfig& c, const PricePath& s, std::uint64_t seed) {
  const auto& st = c.strategy;
  if (st.kind == "explicit") {
    if (st.positions.size() != s.size())
      fail(ErrorCode::Validation, fmt::format("strategy.positions needs {} entries, got {}", s.size(), st.positions.size()));
    return ElementaryStrategy::from_after_trade(s.grid, st.positions);
  }
  if (st.kind == "random")
    return ElementaryStrategy::from_after_trade(s.grid, random_positions(s.size(), c.dividends.max_shares, seed));
  return feedback_strategy(make_rule(st), s);
}

std::string flow_csv(const PricePath& s, const ElementaryStrategy& phi, const TaxFlow& flow) {
  std::string out = "t,S,phi,Pi_left,Pi,Pi_right\n";
  for (std::size_t k = 0; k < s.size(); ++k)
    out += fmt::format("{},{},{},{},{},{}\n", num(s.grid[k]), num(s[k]), num(phi.after(k)), num(flow.left[k]),
                       num(flow.at[k]), num(flow.right[k]));
  return out;
}

json stats(std::vector<double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  return {{"mean", mean},
          {"q05", quantile(v, 0.05)},
          {"q50", quantile(v, 0.5)},
          {"q95", quantile(v, 0.95)},
          {"min", *std::min_element(v.begin(), v.end())},
          {"max", *std::max_element(v.begin(), v.end())}};
}

int run_ledger(const ExperimentConfig& c, Writer& w, json& summary) {
  const auto& st = c.strategy;
  std::optional<Fixture> fx;
  if (st.kind == "fixture") {
    fx = fixture_by_name(st.fixture);
  } else {
    PricePath s = [&] {
      if (st.kind == "explicit" && !st.prices.empty())
        return PricePath(TimeGrid::integer(st.prices.size() - 1), st.prices);
      const std::size_t steps = st.kind == "explicit" ? st.positions.size() - 1 : c.model.steps;
      if (steps == 0) fail(ErrorCode::Validation, "strategy.positions needs at least two entries");
      return make_path(c.model, steps, c.seed);
    }();
    ElementaryStrategy phi = strategy_on(c, s, c.seed);
    fx = Fixture{"custom", s, DividendPath::zero(s.grid), phi};
  }
  TaxComponents parts;
  const TaxFlow flow = tax_process_elementary(fx->strategy, fx->prices, fx->dividends, c.alpha, &parts);
  w.write("tax_flow.csv", flow_csv(fx->prices, fx->strategy, flow));

  const DiscreteStrategy disc = fx->strategy.to_discrete();
  const PricePath steps(TimeGrid::integer(fx->prices.size() - 1), fx->prices.values);
  const LedgerReplay replay = replay_ledger(disc, steps, c.alpha);
  std::string rows = "t,S,phi,trade_tax,wash_sold\n";
  std::vector<double> wash(fx->prices.size());
  for (std::size_t k = 0; k < fx->prices.size(); ++k) {
    const double inc = replay.accumulated_tax[k] - (k == 0 ? 0.0 : replay.accumulated_tax[k - 1]);
    wash[k] = jump_decomposition(fx->strategy, fx->prices, fx->dividends, c.alpha, k).wash_sold_shares;
    rows += fmt::format("{},{},{},{},{}\n", num(fx->prices.grid[k]), num(fx->prices[k]), num(disc.after(k)), num(inc),
                        num(wash[k]));
  }
  w.write("ledger_steps.csv", rows);
  w.write("lots.csv", ledger_csv(replay.ledgers.back()));

  summary["source"] = fx->name;
  summary["Pi_right"] = flow.right;
  summary["Pi"] = flow.at;
  summary["wash_sold"] = wash;
  summary["final_position"] = fx->strategy.terminal();
  summary["dividend_tax"] = parts.dividend;
  return 0;
}

int run_simulate(const ExperimentConfig& c, Writer& w, json& summary) {
  struct Row {
    double s_t, min_s, pi, pi_right, v_right;
  };
  std::vector<Row> rows(c.batch);
  std::string first;
  parallel_for(c.batch, c.threads, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(c.seed, i);
    const PricePath s = make_path(c.model, c.model.steps, seed);
    const ElementaryStrategy phi = strategy_on(c, s, seed);
    const DividendPath d = DividendPath::zero(s.grid);
    const WealthPath wp = self_financing_wealth(phi, s, d, RatePath::constant(s.grid, c.rate), c.alpha, c.v0);
    const std::size_t n = s.size() - 1;
    rows[i] = {s[n], s.running_min(n), wp.tax.at[n], wp.tax.right[n], wp.v_right[n]};
    if (i == 0) first = flow_csv(s, phi, wp.tax);
  });
  std::string csv = "path,S_T,min_S,Pi_T,Pi_T_right,V_T_right\n";
  std::vector<double> pis, vs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    csv += fmt::format("{},{},{},{},{},{}\n", i, num(r.s_t), num(r.min_s), num(r.pi), num(r.pi_right), num(r.v_right));
    pis.push_back(r.pi_right);
    vs.push_back(r.v_right);
  }
  w.write("paths.csv", csv);
  w.write("tax_flow.csv", first);
  summary["paths"] = c.batch;
  summary["Pi_T_right"] = stats(pis);
  summary["V_T_right"] = stats(vs);
  return 0;
}

int run_compare(const ExperimentConfig& c, Writer& w, json& summary) {
  struct Row {
    double min_gap, max_gap, min_tax_gap;
    std::size_t dominance, violations;
    bool ratio_ok;
  };
  std::vector<Row> rows(c.batch);
  std::string first, first_summary;
  parallel_for(c.batch, c.threads, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(c.seed, i);
    const DividendModel m = random_dividend_model(seed, c.model.steps, c.model.s0, c.dividends.step_return,
                                                  c.dividends.probability, c.dividends.max_yield);
    const PricePath sd = solve_dividend_sde(m);
    const ElementaryStrategy phi = strategy_on(c, sd, seed);
    const DividendComparison cmp =
        compare_dividend_policies(phi, m, RatePath::constant(sd.grid, c.rate), c.alpha, c.v0);
    const bool ratio = ratio_monotone_check(cmp.with_dividends, cmp.without_dividends).ok();
    rows[i] = {cmp.min_wealth_gap, cmp.max_wealth_gap, cmp.min_tax_gap, cmp.dominance_failures, cmp.violations, ratio};
    if (i == 0) {
      first = comparison_csv(cmp);
      first_summary = comparison_summary_json(cmp);
    }
  });
  std::string csv = "path,min_wealth_gap,max_wealth_gap,min_tax_gap,dominance_failures,violations,ratio_ok\n";
  double min_gap = std::numeric_limits<double>::infinity(), max_gap = -min_gap, min_tax = min_gap;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    csv += fmt::format("{},{},{},{},{},{},{}\n", i, num(r.min_gap), num(r.max_gap), num(r.min_tax_gap), r.dominance,
                       r.violations, r.ratio_ok ? 1 : 0);
    min_gap = std::min(min_gap, r.min_gap);
    max_gap = std::max(max_gap, r.max_gap);
    min_tax = std::min(min_tax, r.min_tax_gap);
    violations += r.violations + r.dominance + (r.ratio_ok ? 0 : 1);
  }
  w.write("comparison.csv", first);
  w.write("batch.csv", csv);
  summary["models"] = c.batch;
  summary["min_gap"] = min_gap;
  summary["max_gap"] = max_gap;
  summary["min_tax_gap"] = min_tax;
  summary["violation_count"] = violations;
  summary["rates_nonnegative"] = c.rate >= 0.0;
  summary["first_model"] = json::parse(first_summary);
  return violations == 0 ? 0 : 2;
}

int run_efficient(const ExperimentConfig& c, Writer& w, json& summary) {
  const FeedbackRule rule = make_rule(c.strategy);
  const PricePath s = make_path(c.model, c.model.steps, c.seed);
  const ElementaryStrategy phi = feedback_strategy(rule, s);
  const TaxFlow engine = tax_process_elementary(phi, s, DividendPath::zero(s.grid), c.alpha);
  const ClosedFormTax cf = closed_form_tax(rule, s, c.alpha);
  std::string csv = "t,S,phi,engine_Pi_right,closed_form_Pi,minimum_part,covariation\n";
  double worst = 0.0;
  bool nonpositive = true;
  for (std::size_t k = 0; k < s.size(); ++k) {
    csv += fmt::format("{},{},{},{},{},{},{}\n", num(s.grid[k]), num(s[k]), num(phi.after(k)), num(engine.right[k]),
                       num(cf.flow.at[k]), num(cf.minimum_part[k]), num(cf.covariation[k]));
    worst = std::max(worst, std::abs(engine.right[k] - cf.flow.at[k]));
    nonpositive = nonpositive && cf.flow.at[k] <= 0.0;
  }
  w.write("efficient.csv", csv);
  summary["rule"] = rule.describe();
  summary["monotone_response"] = monotone_response(phi, s);
  summary["closed_form_nonpositive"] = nonpositive;
  summary["engine_Pi_T"] = engine.right.back();
  summary["closed_form_Pi_T"] = cf.flow.at.back();
  summary["max_abs_difference"] = worst;
  summary["mesh"] = s.grid.dt(0);
  return 0;
}

int run_converge(const ExperimentConfig& c, Writer& w, json& summary) {
  const FeedbackRule rule = make_rule(c.strategy);
  CrrSetup setup;
  setup.s0 = c.model.s0;
  setup.sigma = c.model.sigma;
  setup.horizon = c.model.horizon;
  setup.alpha = c.alpha;
  setup.paths = c.batch;
  setup.seed = c.seed;
  setup.threads = c.threads;
  std::vector<std::size_t> steps, coarse;
  for (std::size_t l = 0; l < c.convergence.levels; ++l) {
    steps.push_back(c.convergence.base_steps << l);
    coarse.push_back(c.convergence.coarse_steps << l);
  }
  const ConvergenceStudy study = convergence_study(rule, setup, steps);
  const auto refinement = refinement_study(rule, setup, coarse.back() * c.convergence.fine_factor, coarse);
  w.write("convergence.csv", convergence_csv(study));
  w.write("refinement.csv", refinement_csv(refinement));

  std::vector<double> medians, q95;
  bool positive = true, decreasing = true, q95_decreasing = true;
  for (std::size_t l = 0; l < study.rows.size(); ++l) {
    medians.push_back(study.rows[l].abs_error);
    positive = positive && study.rows[l].abs_error > 0.0;
    if (l > 0) decreasing = decreasing && study.rows[l].abs_error < study.rows[l - 1].abs_error;
  }
  for (std::size_t l = 0; l < refinement.size(); ++l) {
    q95.push_back(refinement[l].q95);
    if (l > 0) q95_decreasing = q95_decreasing && refinement[l].q95 < refinement[l - 1].q95;
  }
  summary["median_abs_error"] = medians;
  summary["strictly_positive"] = positive;
  summary["strictly_decreasing"] = decreasing;
  summary["scale"] = study.scale;
  summary["relative_error_finest"] = study.scale > 0.0 ? medians.back() / study.scale : 0.0;
  summary["closed_form_nonpositive"] = study.closed_form_nonpositive;
  summary["refinement_q95"] = q95;
  summary["refinement_q95_decreasing"] = q95_decreasing;
  return 0;
}

int run_verify(const ExperimentConfig& c, Writer& w, json& summary) {
  const auto checks = run_invariant_suite(c.seed, c.batch, c.threads);
  std::string csv = "check,passed,instances,worst,detail\n";
  bool all = true;
  json list = json::array();
  for (const auto& r : checks) {
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    csv += fmt::format("{},{},{},{},{}\n", r.name, r.passed ? 1 : 0, r.instances, num(r.worst), detail);
    all = all && r.passed;
    list.push_back({{"check", r.name}, {"passed", r.passed}, {"instances", r.instances}, {"detail", r.detail}});
  }
  w.write("verify.csv", csv);
  summary["checks"] = list;
  summary["all_passed"] = all;
  return all ? 0 : 2;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  require_valid(config);
  Writer w(out_dir);
  json summary;
  summary["experiment"] = to_string(config.kind);
  summary["seed"] = config.seed;
  int code = 0;
  switch (config.kind) {
    case ExperimentKind::Ledger: code = run_ledger(config, w, summary); break;
    case ExperimentKind::Simulate: code = run_simulate(config, w, summary); break;
    case ExperimentKind::CompareDividends: code = run_compare(config, w, summary); break;
    case ExperimentKind::Efficient: code = run_efficient(config, w, summary); break;
    case ExperimentKind::Converge: code = run_converge(config, w, summary); break;
    case ExperimentKind::Verify: code = run_verify(config, w, summary); break;
  }
  summary["exit_code"] = code;
  RunReport report;
  report.summary_json = summary.dump(2) + "\n";
  w.write("summary.json", report.summary_json);

  json manifest;
  manifest["version"] = library_version();
  manifest["experiment"] = to_string(config.kind);
  manifest["seed"] = config.seed;
  manifest["config"] = json::parse(config_json(config));
  json outputs = json::array();
  for (const auto& f : w.files()) outputs.push_back({{"file", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  manifest["outputs"] = outputs;
  w.write("manifest.json", manifest.dump(2) + "\n", false);

  report.exit_code = code;
  report.files = w.files();
  return report;
}

}  // namespace taxflow
