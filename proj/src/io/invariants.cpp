#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "taxflow/cli_io.hpp"
#include "taxflow/efficient_strategies.hpp"
#include "taxflow/error.hpp"
#include "taxflow/lot_ledger.hpp"
#include "taxflow/parallel.hpp"
#include "taxflow/rng.hpp"
#include "taxflow/tax_flow.hpp"
#include "taxflow/wealth.hpp"

namespace taxflow {

namespace {

constexpr double kAlpha = 0.25;

struct Discrete {
  PricePath prices;
  DiscreteStrategy phi;
};

Discrete small_discrete(std::uint64_t seed, std::size_t max_last, long max_shares) {
  Rng rng(seed, 31);
  const auto last = static_cast<std::size_t>(rng.uniform_int(1, static_cast<long>(max_last)));
  std::vector<double> s{20}, pos;
  for (std::size_t t = 0; t <= last; ++t) {
    pos.push_back(static_cast<double>(rng.uniform_int(0, max_shares)));
    if (t < last) s.push_back(std::max(1.0, s.back() + static_cast<double>(rng.uniform_int(-4, 4))));
  }
  return {PricePath(TimeGrid::integer(last), s), DiscreteStrategy(pos)};
}

struct GridCase {
  ElementaryStrategy phi;
  PricePath prices;
  DividendPath dividends;
};

// Binomial prices with random integer positions and occasional dividends.
GridCase crr_case(std::uint64_t seed, std::size_t max_steps, bool dividends) {
  Rng rng(seed, 37);
  const auto steps = static_cast<std::size_t>(rng.uniform_int(2, static_cast<long>(max_steps)));
  const PricePath s = gen_crr(100.0, 0.3, steps, 1.0, seed);
  std::vector<double> phi{0.0}, d{0.0};
  for (std::size_t k = 1; k <= steps; ++k) {
    phi.push_back(static_cast<double>(rng.uniform_int(0, 8)));
    d.push_back(d.back() + (dividends && rng.uniform() < 0.2 ? 0.5 * rng.uniform() : 0.0));
  }
  const double terminal = static_cast<double>(rng.uniform_int(0, 8));
  return {ElementaryStrategy(s.grid, phi, terminal), s, DividendPath(s.grid, d)};
}

// Any lot choice: the reduction is taken from randomly chosen lots, and a
// random lot may additionally be sold and rebought.
LotMatrix random_lot_matrix(const DiscreteStrategy& phi, Rng& rng) {
  const std::size_t last = phi.last_index();
  LotMatrix n(last);
  n(0, 0) = phi.after(0);
  for (std::size_t t = 1; t <= last; ++t) {
    for (std::size_t s = 0; s < t; ++s) n(s, t) = n(s, t - 1);
    double cut = std::max(0.0, -phi.change(t));
    while (cut > 0.0) {
      const auto s = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(t) - 1));
      const double take = std::min(n(s, t), cut);
      n(s, t) -= take;
      cut -= take;
    }
    double rebuy = 0.0;
    if (rng.coin()) {
      const auto s = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(t) - 1));
      rebuy = n(s, t);
      n(s, t) = 0.0;
    }
    n(t, t) = std::max(0.0, phi.change(t)) + rebuy;
  }
  return n;
}

BookProfitFunction recursion_step(const BookProfitFunction& prev, double change, double ds) {
  std::vector<ProfitSegment> out;
  double drop = std::max(0.0, -change);
  for (const auto& seg : prev.segments()) {
    const double keep = seg.width - std::min(seg.width, drop);
    drop -= seg.width - keep;
    if (keep > 0.0) out.push_back({keep, std::max(seg.profit + ds, 0.0)});
  }
  if (change > 0.0) out.insert(out.begin(), ProfitSegment{change, 0.0});
  return BookProfitFunction(std::move(out));
}

// Runs fn over `count` instances; fn returns the violation margin (<= 0 means fine).
CheckResult run_check(const std::string& name, std::size_t count, std::size_t threads,
                      const std::function<double(std::size_t)>& fn) {
  std::vector<double> margin(count, 0.0);
  std::vector<std::string> errors(count);
  parallel_for(count, threads, [&](std::size_t i) {
    try {
      margin[i] = fn(i);
    } catch (const std::exception& e) {
      margin[i] = std::numeric_limits<double>::infinity();
      errors[i] = e.what();
    }
  });
  CheckResult r{name, true, count, 0.0, ""};
  std::size_t failures = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (margin[i] > 0.0) {
      if (failures == 0)
        r.detail = errors[i].empty() ? fmt::format("first failure at instance {}", i)
                                     : fmt::format("instance {}: {}", i, errors[i]);
      ++failures;
      r.worst = std::max(r.worst, margin[i]);
    }
  }
  r.passed = failures == 0;
  if (!r.passed) r.detail = fmt::format("{} of {} instances failed; {}", failures, count, r.detail);
  return r;
}

double exact_gap(double a, double b) { return a == b ? 0.0 : std::max(std::abs(a - b), 1e-300); }

}  // namespace

std::vector<CheckResult> run_invariant_suite(std::uint64_t seed, std::size_t batch, std::size_t threads) {
  require(batch >= 1, "invariant suite: batch must be at least 1");
  std::vector<CheckResult> out;
  auto sd = [&](std::size_t i, std::uint64_t salt) { return derive_seed(seed ^ salt, i); };

  out.push_back(run_check("wash_rule_optimal", batch, threads, [&](std::size_t i) {
    const auto c = small_discrete(sd(i, 1), 4, 4);
    const auto best = brute_force_min_tax_all(c.phi, c.prices, kAlpha, 1.0);
    const auto pi = tax_payments(wash_optimal_strategy(c.phi, c.prices), c.prices, kAlpha);
    double worst = 0.0;
    for (std::size_t t = 0; t < pi.size(); ++t) worst = std::max(worst, exact_gap(pi[t], best[t]));
    return worst;
  }));

  out.push_back(run_check("discrete_tax_identity", batch, threads, [&](std::size_t i) {
    const auto c = small_discrete(sd(i, 2), 10, 6);
    Rng rng(sd(i, 2), 1);
    double worst = 0.0;
    for (const LotMatrix& n : {wash_optimal_strategy(c.phi, c.prices), random_lot_matrix(c.phi, rng)}) {
      if (!validate(n, c.phi)) return 1.0;
      const auto pi = tax_payments(n, c.prices, kAlpha);
      for (std::size_t t = 0; t < pi.size(); ++t) {
        const double rhs = kAlpha * trading_gains(c.phi, c.prices, t) -
                           kAlpha * book_profit_fn_discrete(n, c.prices, t).integral();
        worst = std::max(worst, std::abs(pi[t] - rhs) - 1e-10);
      }
    }
    return worst;
  }));

  out.push_back(run_check("book_profit_recursion", batch, threads, [&](std::size_t i) {
    const auto c = small_discrete(sd(i, 3), 12, 6);
    const LotMatrix n = wash_optimal_strategy(c.phi, c.prices);
    BookProfitFunction f;
    for (std::size_t t = 0; t <= c.phi.last_index(); ++t) {
      f = recursion_step(f, c.phi.change(t), t == 0 ? 0.0 : c.prices[t] - c.prices[t - 1]);
      const auto engine = book_profit_fn_discrete(n, c.prices, t);
      if (!engine.nondecreasing() || !engine.nonnegative()) return 1.0;
      if (engine.normalized().segments() != f.normalized().segments()) return 1.0;
    }
    return 0.0;
  }));

  out.push_back(run_check("ledger_replay", batch, threads, [&](std::size_t i) {
    const auto c = small_discrete(sd(i, 4), 12, 6);
    const auto replay = replay_ledger(c.phi, c.prices, kAlpha);
    const auto pi = tax_payments(wash_optimal_strategy(c.phi, c.prices), c.prices, kAlpha);
    double worst = 0.0;
    for (std::size_t t = 0; t < pi.size(); ++t) worst = std::max(worst, exact_gap(pi[t], replay.accumulated_tax[t]));
    return worst;
  }));

  out.push_back(run_check("book_profit_shape", batch, threads, [&](std::size_t i) {
    const auto c = crr_case(sd(i, 5), 40, false);
    const BookProfitIndex index(c.phi, c.prices);
    for (std::size_t k = 0; k < c.phi.size(); ++k) {
      const auto f = index.function(k);
      if (!f.nondecreasing() || !f.nonnegative()) return 1.0;
      if (std::abs(f.total_width() - c.phi.held(k)) > 1e-12) return 1.0;
      if (book_profit(c.phi, c.prices, k, c.phi.held(k) + 0.5) != 0.0) return 1.0;
      std::size_t prev = purchase_time(c.phi, k, 0.0);
      for (double x = 0.5; x <= c.phi.held(k); x += 0.5) {
        const std::size_t tau = purchase_time(c.phi, k, x);
        if (tau > prev) return 1.0;
        prev = tau;
      }
    }
    return 0.0;
  }));

  out.push_back(run_check("embedding_equality", batch, threads, [&](std::size_t i) {
    const auto c = crr_case(sd(i, 6), 40, false);
    const DiscreteStrategy disc = c.phi.to_discrete();
    const PricePath s(TimeGrid::integer(c.prices.size() - 1), c.prices.values);
    const LotMatrix n = wash_optimal_strategy(disc, s);
    const auto pi = tax_payments(n, s, kAlpha);
    const auto flow = tax_process_elementary(c.phi, c.prices, c.dividends, kAlpha);
    const BookProfitIndex index(c.phi, c.prices);
    double worst = 0.0;
    for (std::size_t k = 0; k < pi.size(); ++k) {
      worst = std::max(worst, std::abs(flow.right[k] - pi[k]) - 1e-9 * std::max(1.0, std::abs(pi[k])));
      const auto a = index.function(k, Side::Right).normalized().segments();
      const auto b = book_profit_fn_discrete(n, s, k).normalized().segments();
      if (a.size() != b.size()) return 1.0;
      for (std::size_t j = 0; j < a.size(); ++j)
        worst = std::max({worst, std::abs(a[j].width - b[j].width) - 1e-9,
                          std::abs(a[j].profit - b[j].profit) - 1e-9 * std::max(1.0, std::abs(b[j].profit))});
    }
    return worst;
  }));

  out.push_back(run_check("dual_formula", batch, threads, [&](std::size_t i) {
    const auto c = crr_case(sd(i, 7), 200, true);
    const auto direct = tax_process_elementary(c.phi, c.prices, c.dividends, kAlpha);
    const auto ident = tax_process_via_identity(c.phi, c.prices, c.dividends, kAlpha);
    return up_distance(direct, ident) - 1e-10;
  }));

  out.push_back(run_check("jump_signs", batch, threads, [&](std::size_t i) {
    const auto c = crr_case(sd(i, 8), 60, true);
    TaxComponents parts;
    tax_process_elementary(c.phi, c.prices, c.dividends, kAlpha, &parts);
    double worst = 0.0;
    for (std::size_t k = 0; k < parts.sale.size(); ++k)
      worst = std::max({worst, -parts.sale[k], parts.wash[k], -parts.dividend[k]});
    return worst;
  }));

  out.push_back(run_check("homogeneity_subadditivity", batch, threads, [&](std::size_t i) {
    const auto a = crr_case(sd(i, 9), 60, true);
    const auto b = crr_case(sd(i, 10), 60, true);
    std::vector<double> v(a.phi.size());
    for (std::size_t k = 1; k < v.size(); ++k) v[k] = k < b.phi.size() ? b.phi.held(k) : b.phi.terminal();
    const ElementaryStrategy psi(a.phi.grid(), v, b.phi.terminal());
    const auto fa = tax_process_elementary(a.phi, a.prices, a.dividends, kAlpha);
    const auto fb = tax_process_elementary(psi, a.prices, a.dividends, kAlpha);
    const auto fs = tax_process_elementary(a.phi.plus(psi), a.prices, a.dividends, kAlpha);
    const auto f2 = tax_process_elementary(a.phi.scaled(2.0), a.prices, a.dividends, kAlpha);
    double worst = 0.0;
    for (std::size_t k = 0; k < fa.size(); ++k)
      for (Side side : {Side::Left, Side::At, Side::Right}) {
        worst = std::max(worst, fs.value(k, side) - fa.value(k, side) - fb.value(k, side) - 1e-10);
        worst = std::max(worst, exact_gap(f2.value(k, side), 2.0 * fa.value(k, side)));
      }
    return worst;
  }));

  out.push_back(run_check("non_additivity_fixture", 1, 1, [&](std::size_t) {
    const TimeGrid g = TimeGrid::integer(2);
    const PricePath s(g, {100, 105, 105});
    const auto d = DividendPath::zero(g);
    const auto first = indicator_strategy(g, {{0.0, 1.0}});
    const auto second = indicator_strategy(g, {{1.0, 2.0}});
    const double sum = tax_process_elementary(first.plus(second), s, d, kAlpha).right[1];
    const double parts = tax_process_elementary(first, s, d, kAlpha).right[1] +
                         tax_process_elementary(second, s, d, kAlpha).right[1];
    return (sum == 0.0 && parts == 5 * kAlpha) ? 0.0 : 1.0;
  }));

  out.push_back(run_check("stability_bound", batch, threads, [&](std::size_t i) {
    const auto c = crr_case(sd(i, 11), 120, false);
    Rng rng(sd(i, 11), 2);
    const double eps = rng.uniform();
    std::vector<double> v = c.phi.values();
    for (std::size_t k = 1; k < v.size(); ++k) v[k] = std::max(0.0, v[k] + eps * (2.0 * rng.uniform() - 1.0));
    const ElementaryStrategy tilde(c.phi.grid(), v, c.phi.terminal());
    double worst = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const auto r = stability_bound_check(c.phi, tilde, c.prices, k);
      worst = std::max(worst, r.lhs - r.rhs - 1e-12);
    }
    return worst;
  }));

  // One pass over random dividend models feeds the three dividend checks.
  struct DividendOutcome {
    bool ratio_ok = true;
    double tax_gap = 0.0, wealth_gap = 0.0;
    std::size_t dominance = 0;
    std::string error;
  };
  std::vector<DividendOutcome> div(batch);
  parallel_for(batch, threads, [&](std::size_t i) {
    try {
      const DividendModel m = random_dividend_model(sd(i, 12), 20, 100.0);
      const PricePath sd_path = solve_dividend_sde(m);
      Rng rng(sd(i, 12), 3);
      std::vector<double> after(sd_path.size());
      for (double& x : after) x = static_cast<double>(rng.uniform_int(0, 6));
      const auto phi = ElementaryStrategy::from_after_trade(sd_path.grid, after);
      const auto cmp = compare_dividend_policies(phi, m, RatePath::constant(sd_path.grid, 0.03), 0.35, 1000.0);
      div[i] = {ratio_monotone_check(cmp.with_dividends, cmp.without_dividends).ok(), cmp.min_tax_gap,
                cmp.min_wealth_gap, cmp.dominance_failures, ""};
    } catch (const std::exception& e) {
      div[i].error = e.what();
      div[i].ratio_ok = false;
    }
  });
  out.push_back(run_check("dividend_ratio_monotone", batch, 1, [&](std::size_t i) { return div[i].ratio_ok ? 0.0 : 1.0; }));
  out.push_back(run_check("dividend_tax_order", batch, 1, [&](std::size_t i) {
    return std::max(-div[i].tax_gap - 1e-9, div[i].dominance > 0 ? 1.0 : 0.0);
  }));
  out.push_back(run_check("dividend_wealth_gap", batch, 1, [&](std::size_t i) { return -div[i].wealth_gap - 1e-9; }));

  out.push_back(run_check("closed_form_consistency", batch, threads, [&](std::size_t i) {
    const FeedbackRule rule = FeedbackRule::linear(1.0, 0.5);
    const PricePath s = gen_crr(100.0, 0.2, 200, 1.0, sd(i, 13));
    const auto phi = feedback_strategy(rule, s);
    const auto cf = closed_form_tax(rule, s, kAlpha);
    const auto engine = tax_process_elementary(phi, s, DividendPath::zero(s.grid), kAlpha);
    double worst = 0.0, gains = 0.0, low = s[0];
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k > 0) {
        const double ds = s[k] - s[k - 1];
        gains += phi.held(k) * ds;
        worst = std::max({worst, cf.minimum_part[k] - cf.minimum_part[k - 1], cf.covariation[k - 1] - cf.covariation[k]});
        double step = 0.0;
        if (ds < 0.0) step = s[k] >= low ? kAlpha * (rule(s[k - 1]) - rule(s[k])) * ds : kAlpha * ds * rule(s[k - 1]);
        worst = std::max(worst, std::abs(engine.right[k] - engine.right[k - 1] - step) - 1e-9);
        low = std::min(low, s[k]);
      }
      worst = std::max(worst, cf.flow.at[k]);
      const double identity =
          kAlpha * gains - kAlpha * (rule.antiderivative(s[k]) - rule.antiderivative(s.running_min(k)));
      worst = std::max(worst, std::abs(identity - cf.flow.at[k]) - 1e-9 * std::max(1.0, std::abs(cf.flow.at[k])));
    }
    return worst;
  }));

  out.push_back(run_check("pointwise_counterexample", 1, 1, [&](std::size_t) {
    const std::size_t m = 256;
    const TimeGrid g = TimeGrid::uniform(m, 1.0);
    std::vector<double> v(m + 1);
    for (std::size_t k = 0; k <= m; ++k) v[k] = 1.0 + g[k];
    const PricePath s(g, v);
    const auto d = DividendPath::zero(g);
    const auto limit = tax_process_elementary(indicator_strategy(g, {{0.0, 1.0}}), s, d, kAlpha);
    const double bound = kAlpha * (s.at_time(0.5) - s.running_min(g.find(0.5)));
    double worst = -1.0;
    for (std::size_t n : {4, 8, 16, 32, 64}) {
      const double gap = 1.0 / static_cast<double>(n);
      const auto approx = tax_process_elementary(indicator_strategy(g, {{0.0, 0.5}, {0.5 + gap, 1.0}}), s, d, kAlpha);
      worst = std::max(worst, bound - 1e-12 - up_distance(approx, limit));
    }
    return worst;
  }));

  return out;
}

}  // namespace taxflow
