// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "taxflow/efficient_strategies.hpp"
#include "taxflow/fixtures.hpp"
#include "taxflow/lot_ledger.hpp"
#include "taxflow/rng.hpp"
#include "taxflow/tax_flow.hpp"
#include "taxflow/wealth.hpp"

using namespace taxflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& body) {
  Outcome o;
  const auto start = Clock::now();
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %2d  %s  [%s; %.2fs]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(),
              seconds_since(start));
  std::fflush(stdout);
}

// Binomial path with random integer holdings and, optionally, dividends.
struct GridCase {
  ElementaryStrategy phi;
  PricePath prices;
  DividendPath dividends;
};

GridCase crr_case(std::uint64_t seed, std::size_t max_steps, bool with_dividends) {
  Rng rng(seed, 101);
  const auto steps = static_cast<std::size_t>(rng.uniform_int(2, static_cast<long>(max_steps)));
  const PricePath s = gen_crr(100.0, 0.3, steps, 1.0, seed);
  std::vector<double> phi{0.0}, d{0.0};
  for (std::size_t k = 1; k <= steps; ++k) {
    phi.push_back(static_cast<double>(rng.uniform_int(0, 10)));
    d.push_back(d.back() + (with_dividends && rng.uniform() < 0.2 ? rng.uniform() : 0.0));
  }
  const double terminal = static_cast<double>(rng.uniform_int(0, 10));
  return {ElementaryStrategy(s.grid, phi, terminal), s, DividendPath(s.grid, d)};
}

constexpr double kAlpha = 0.25;

Outcome figure2() {
  const Fixture fx = figure2_fixture();
  const auto start = Clock::now();
  const TaxFlow flow = tax_process_elementary(fx.strategy, fx.prices, fx.dividends, kAlpha);
  const JumpParts j = jump_decomposition(fx.strategy, fx.prices, fx.dividends, kAlpha, 4);
  const LedgerReplay replay = replay_ledger(fx.strategy.to_discrete(), fx.prices, kAlpha);
  const double elapsed = seconds_since(start);

  const std::vector<double> expected{0, 0, 0, 4 * kAlpha, 3 * kAlpha};
  bool ok = flow.right == expected && replay.accumulated_tax == expected;
  ok = ok && j.wash_sold_shares == 1.0 && j.wash_part == -kAlpha * 1.0;
  ok = ok && replay.wash_sold[4] == 1.0;
  for (std::size_t t = 0; t < 4; ++t) ok = ok && replay.wash_sold[t] == 0.0;
  ok = ok && elapsed < 1e-3;
  return {ok, fmt::format("right=({}) wash_sold[4]={} realized loss={} runtime={:.1f}us",
                          fmt::join(flow.right, ","), j.wash_sold_shares, -j.wash_part / kAlpha, elapsed * 1e6)};
}

Outcome figure3() {
  const Fixture fx = figure3_fixture();
  const std::size_t k = fx.prices.size() - 1;  // dividend date
  const JumpParts j = jump_decomposition(fx.strategy, fx.prices, fx.dividends, kAlpha, k);
  const double added = fx.strategy.after(k) - fx.strategy.held(k);
  const BookProfitIndex index(fx.strategy, fx.prices);
  auto zero_width = [&](Side side) {
    double w = 0.0;
    const BookProfitFunction f = index.function(k, side);
    for (const auto& seg : f.segments())
      if (seg.profit == 0.0) w += seg.width;
    return w;
  };
  const double zero_at = zero_width(Side::At), zero_after = zero_width(Side::Right);
  const LedgerReplay replay = replay_ledger(fx.strategy.to_discrete(), fx.prices, kAlpha);
  // Zero-profit shares: the 55 rebought at the date, plus the 20 new ones right after.
  const bool ok = j.wash_sold_shares == 55.0 && replay.wash_sold[k] == 55.0 && added == 20.0 && zero_at == 55.0 &&
                  zero_after == 75.0;
  return {ok, fmt::format("wash_sold={} new_shares={} zero-profit width at/after {}/{}", j.wash_sold_shares, added,
                          zero_at, zero_after)};
}

Outcome brute_force() {
  const std::size_t count = 300;
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(i, 103);
    const auto last = static_cast<std::size_t>(rng.uniform_int(1, 4));
    std::vector<double> s{20}, pos;
    for (std::size_t t = 0; t <= last; ++t) {
      pos.push_back(static_cast<double>(rng.uniform_int(0, 4)));
      if (t < last) s.push_back(std::max(1.0, s.back() + static_cast<double>(rng.uniform_int(-5, 5))));
    }
    const PricePath prices(TimeGrid::integer(last), s);
    const DiscreteStrategy phi(pos);
    const auto pi = tax_payments(wash_optimal_strategy(phi, prices), prices, kAlpha);
    const auto best = brute_force_min_tax_all(phi, prices, kAlpha, 1.0);
    if (pi != best) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} instances, {} mismatches", count, mismatches)};
}

Outcome dual_formula() {
  double worst = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const GridCase c = crr_case(1000 + i, 200, true);
    const TaxFlow direct = tax_process_elementary(c.phi, c.prices, c.dividends, kAlpha);
    const TaxFlow ident = tax_process_via_identity(c.phi, c.prices, c.dividends, kAlpha);
    worst = std::max(worst, up_distance(direct, ident));
  }
  return {worst < 1e-10, fmt::format("1000 fixtures, max discrepancy {:.3g}", worst)};
}

Outcome stability() {
  std::size_t violations = 0;
  double tightest = -1e300;
  for (std::size_t i = 0; i < 1000; ++i) {
    const GridCase c = crr_case(3000 + i, 120, false);
    Rng rng(3000 + i, 7);
    const double eps = 2.0 * rng.uniform();
    std::vector<double> v = c.phi.values();
    for (std::size_t k = 1; k < v.size(); ++k) v[k] = std::max(0.0, v[k] + eps * (2.0 * rng.uniform() - 1.0));
    const ElementaryStrategy tilde(c.phi.grid(), v, c.phi.terminal());
    for (std::size_t k = 0; k < v.size(); ++k) {
      const StabilityCheck r = stability_bound_check(c.phi, tilde, c.prices, k);
      if (r.lhs > r.rhs + 1e-12) ++violations;
      tightest = std::max(tightest, r.lhs - r.rhs);
    }
  }
  return {violations == 0, fmt::format("1000 instances, {} violations, max lhs-rhs {:.3g}", violations, tightest)};
}

Outcome homogeneity() {
  std::size_t homog = 0, sub = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const GridCase a = crr_case(5000 + i, 60, true);
    const GridCase b = crr_case(7000 + i, 60, true);
    std::vector<double> v(a.phi.size(), 0.0);
    for (std::size_t k = 1; k < v.size(); ++k) v[k] = k < b.phi.size() ? b.phi.held(k) : b.phi.terminal();
    const ElementaryStrategy psi(a.phi.grid(), v, b.phi.terminal());
    const TaxFlow fa = tax_process_elementary(a.phi, a.prices, a.dividends, kAlpha);
    const TaxFlow fb = tax_process_elementary(psi, a.prices, a.dividends, kAlpha);
    const TaxFlow fs = tax_process_elementary(a.phi.plus(psi), a.prices, a.dividends, kAlpha);
    for (double lambda : {0.5, 2.0, 4.0}) {
      const TaxFlow fl = tax_process_elementary(a.phi.scaled(lambda), a.prices, a.dividends, kAlpha);
      for (std::size_t k = 0; k < fa.size(); ++k)
        for (Side side : {Side::Left, Side::At, Side::Right})
          if (fl.value(k, side) != lambda * fa.value(k, side)) ++homog;
    }
    for (std::size_t k = 0; k < fa.size(); ++k)
      for (Side side : {Side::Left, Side::At, Side::Right})
        if (fs.value(k, side) > fa.value(k, side) + fb.value(k, side) + 1e-10) ++sub;
  }
  const TimeGrid g = TimeGrid::integer(2);
  const PricePath s(g, {100, 105, 105});
  const auto d = DividendPath::zero(g);
  const auto first = indicator_strategy(g, {{0.0, 1.0}});
  const auto second = indicator_strategy(g, {{1.0, 2.0}});
  const double joint = tax_process_elementary(first.plus(second), s, d, kAlpha).right[1];
  const double separate = tax_process_elementary(first, s, d, kAlpha).right[1] +
                          tax_process_elementary(second, s, d, kAlpha).right[1];
  const bool fixture_ok = joint == 0.0 && separate == 5 * kAlpha;
  return {homog == 0 && sub == 0 && fixture_ok,
          fmt::format("homogeneity mismatches {}, subadditivity violations {}, fixture joint={} separate={}", homog,
                      sub, joint, separate)};
}

Outcome dividends() {
  std::size_t violations = 0;
  double min_wealth = 1e300, min_tax = 1e300;
  for (std::size_t i = 0; i < 1000; ++i) {
    Rng rng(9000 + i, 11);
    const auto steps = static_cast<std::size_t>(rng.uniform_int(5, 40));
    const DividendModel m = random_dividend_model(9000 + i, steps, 100.0);
    const PricePath sd = solve_dividend_sde(m);
    std::vector<double> after(sd.size());
    for (double& x : after) x = static_cast<double>(rng.uniform_int(0, 8));
    const auto phi = ElementaryStrategy::from_after_trade(sd.grid, after);
    const double rate = 0.08 * rng.uniform();
    const double alpha = 0.05 + 0.9 * rng.uniform();
    const auto cmp = compare_dividend_policies(phi, m, RatePath::constant(sd.grid, rate), alpha, 1000.0);
    min_wealth = std::min(min_wealth, cmp.min_wealth_gap);
    min_tax = std::min(min_tax, cmp.min_tax_gap);
    if (cmp.min_wealth_gap < -1e-9 || cmp.min_tax_gap < -1e-9) ++violations;
  }
  const DeferralExperiment e = deferral_experiment(0.25, 0.05, 1.0, 2000);
  const double gap = e.deferred_simulated - e.immediate_simulated;
  const bool near = std::abs(e.deferred_simulated - 1.0384) < 1e-3 && std::abs(e.immediate_simulated - 1.0384) < 1e-3;
  return {violations == 0 && gap > 2e-4 && near,
          fmt::format("1000 models, {} violations, min V0-VD {:.3g}, min PiD-Pi0 {:.3g}; deferral {:.6f} vs {:.6f}",
                      violations, min_wealth, min_tax, e.deferred_simulated, e.immediate_simulated)};
}

Outcome convergence() {
  CrrSetup setup;
  setup.paths = 100;
  setup.seed = 1;
  setup.threads = 4;
  const ConvergenceStudy st = convergence_study(FeedbackRule::linear(1.0), setup, {50, 100, 200, 400, 800, 1600});
  bool monotone = true;
  std::vector<double> med;
  for (std::size_t l = 0; l < st.rows.size(); ++l) {
    med.push_back(st.rows[l].abs_error);
    if (l > 0 && !(st.rows[l].abs_error < st.rows[l - 1].abs_error)) monotone = false;
  }
  const double rel = st.rows.back().abs_error / st.scale;
  return {monotone && rel < 0.02 && st.closed_form_nonpositive,
          fmt::format("medians ({:.4g}), finest {:.3g}% of scale, closed form <= 0: {}", fmt::join(med, ", "),
                      100 * rel, st.closed_form_nonpositive)};
}

Outcome pointwise() {
  const std::size_t m = 1024;
  const TimeGrid g = TimeGrid::uniform(m, 1.0);
  std::vector<double> v(m + 1);
  for (std::size_t k = 0; k <= m; ++k) v[k] = 1.0 + g[k];  // strict book profit at 1/2
  const PricePath s(g, v);
  const auto d = DividendPath::zero(g);
  const auto limit = tax_process_elementary(indicator_strategy(g, {{0.0, 1.0}}), s, d, kAlpha);
  const double bound = kAlpha * (s.at_time(0.5) - s.running_min(g.find(0.5)));
  double smallest = 1e300;
  for (std::size_t n = 2; n <= 512; n *= 2) {
    const double gap = 1.0 / static_cast<double>(n);
    const auto approx = tax_process_elementary(indicator_strategy(g, {{0.0, 0.5}, {0.5 + gap, 1.0}}), s, d, kAlpha);
    smallest = std::min(smallest, up_distance(approx, limit));
  }
  return {bound > 0.0 && smallest >= bound - 1e-12,
          fmt::format("bound {:.6g}, min distance over n=2..512 {:.6g}", bound, smallest)};
}

Outcome refinement() {
  CrrSetup setup;
  setup.paths = 200;
  setup.seed = 1;
  setup.threads = 4;
  const auto rows = refinement_study(FeedbackRule::linear(1.0), setup, 2048, {8, 16, 32, 64, 128, 256});
  bool monotone = rows.size() == 5;
  std::vector<double> q;
  for (std::size_t l = 0; l < rows.size(); ++l) {
    q.push_back(rows[l].q95);
    if (l > 0 && !(rows[l].q95 < rows[l - 1].q95)) monotone = false;
  }
  return {monotone, fmt::format("q95 over 5 levels ({:.4g})", fmt::join(q, ", "))};
}

}  // namespace

int main() {
  report(1, "figure 2 wash sale and tax values", figure2);
  report(2, "figure 3 dividend wash sale", figure3);
  report(3, "wash rule equals exhaustive minimum", brute_force);
  report(4, "direct and dual tax formulas agree", dual_formula);
  report(5, "stability bound", stability);
  report(6, "homogeneity, subadditivity, non-additivity", homogeneity);
  report(7, "dividends lower wealth and raise tax", dividends);
  report(8, "engine converges to closed form", convergence);
  report(9, "pointwise strategy convergence is not enough", pointwise);
  report(10, "tax flows are Cauchy under refinement", refinement);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
