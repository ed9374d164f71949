#include <doctest.h>

#include <cmath>

#include "taxflow/error.hpp"
#include "taxflow/rng.hpp"
#include "taxflow/wealth.hpp"

using namespace taxflow;

namespace {

ElementaryStrategy random_strategy(const TimeGrid& g, std::uint64_t seed) {
  Rng rng(seed, 5);
  std::vector<double> phi(g.size(), 0.0);
  for (std::size_t k = 1; k < g.size(); ++k) phi[k] = static_cast<double>(rng.uniform_int(0, 5));
  return ElementaryStrategy(g, phi, static_cast<double>(rng.uniform_int(0, 5)));
}

}  // namespace

TEST_CASE("pure bank account and linear scaling in initial wealth") {
  const TimeGrid g = TimeGrid::uniform(10, 1.0);
  const ElementaryStrategy none(g, std::vector<double>(11, 0.0), 0.0);
  const PricePath s(g, std::vector<double>(11, 50.0));
  const RatePath r = RatePath::constant(g, 0.04);
  const auto w = self_financing_wealth(none, s, DividendPath::zero(g), r, 0.3, 100.0);
  CHECK(w.v_right.back() == doctest::Approx(100.0 * std::pow(1.0 + 0.7 * 0.04 * 0.1, 10)).epsilon(1e-14));
  const auto w2 = self_financing_wealth(none, s, DividendPath::zero(g), r, 0.3, 200.0);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(w2.v_at[k] == doctest::Approx(2.0 * w.v_at[k]).epsilon(1e-15));
  CHECK(w.rates_nonnegative);
  const auto neg = self_financing_wealth(none, s, DividendPath::zero(g), RatePath::constant(g, -0.01), 0.3, 100.0);
  CHECK_FALSE(neg.rates_nonnegative);
  CHECK(neg.v_right.back() < 100.0);
}

TEST_CASE("buy and hold with terminal liquidation pays tax on the gain") {
  const TimeGrid g = TimeGrid::uniform(4, 1.0);
  const PricePath s(g, {10, 12, 11, 15, 14});
  const ElementaryStrategy phi(g, {0, 3, 3, 3, 3}, 0.0);
  const auto w = self_financing_wealth(phi, s, DividendPath::zero(g), RatePath::constant(g, 0.0), 0.25, 100.0);
  CHECK(w.v_right.back() == doctest::Approx(100.0 + 0.75 * (14.0 - 10.0) * 3.0));
  CHECK(w.residual < 1e-9);
  for (std::size_t k = 0; k < w.size(); ++k) {
    CHECK(w.v_at[k] == doctest::Approx(w.x_at[k] + phi.held(k) * s[k]));
    CHECK(w.v_right[k] == doctest::Approx(w.x_right[k] + phi.after(k) * s[k]));
  }
}

TEST_CASE("self-financing forms agree on random data") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto m = random_dividend_model(seed, 25, 100.0);
    const auto sd = solve_dividend_sde(m);
    const auto phi = random_strategy(sd.grid, seed);
    const auto w = self_financing_wealth(phi, sd, m.dividends, RatePath::constant(sd.grid, 0.03), 0.3, 1000.0);
    CHECK(w.residual < 1e-9);
  }
}

TEST_CASE("dividend recursion") {
  const TimeGrid g = TimeGrid::uniform(3, 1.0);
  const ReturnPath flat(g, {0.0, 0.0, 0.0});
  const auto none = solve_dividend_sde({ReturnPath(g, {0.1, -0.2, 0.5}), DividendPath::zero(g), 10.0});
  CHECK(none[3] == doctest::Approx(10.0 * 1.1 * 0.8 * 1.5));
  const auto gone = solve_dividend_sde({flat, DividendPath(g, {0, 10, 10, 10}), 10.0});
  CHECK(gone.values == std::vector<double>{10, 0, 0, 0});
  try {
    solve_dividend_sde({flat, DividendPath(g, {0, 1, 12, 12}), 10.0});
    FAIL("expected an inadmissible dividend");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }

  // Rising price followed by a dividend of 1000 with no return at that step.
  const TimeGrid g3 = TimeGrid::integer(3);
  const ReturnPath r3(g3, {0.26, 512.5 / 6300.0, 0.0});
  const auto s3 = solve_dividend_sde({r3, DividendPath(g3, {0, 0, 0, 1000}), 5000.0});
  CHECK(s3[1] == doctest::Approx(6300.0));
  CHECK(s3[2] == doctest::Approx(6812.5));
  CHECK(s3[3] - s3[2] == doctest::Approx(-1000.0));
}

TEST_CASE("ratio of dividend and twin prices") {
  const TimeGrid g = TimeGrid::uniform(4, 1.0);
  const ReturnPath r(g, {0.1, -0.05, 0.2, 0.0});
  const DividendModel m{r, DividendPath(g, {0, 0, 5, 5, 5}), 100.0};
  const auto sd = solve_dividend_sde(m);
  const auto s0 = solve_without_dividends(m);
  const auto check = ratio_monotone_check(sd, s0);
  CHECK(check.ok());
  CHECK(sd[1] / s0[1] == doctest::Approx(1.0));
  CHECK(sd[2] / s0[2] < 1.0);
  CHECK(sd[3] / s0[3] == doctest::Approx(sd[2] / s0[2]));
  CHECK(ratio_monotone_check(s0, s0).ok());
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto mm = random_dividend_model(seed, 40, 50.0);
    CHECK(ratio_monotone_check(solve_dividend_sde(mm), solve_without_dividends(mm)).ok());
  }
}

TEST_CASE("strategy mapping preserves trading gains") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto m = random_dividend_model(seed, 30, 80.0);
    const auto sd = solve_dividend_sde(m);
    const auto s0 = solve_without_dividends(m);
    const auto phi_d = random_strategy(sd.grid, seed + 100);
    const auto phi_0 = map_strategy_no_dividends(phi_d, sd, s0);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t k = 1; k < sd.size(); ++k) {
      lhs += phi_0.held(k) * (s0[k] - s0[k - 1]);
      rhs += phi_d.held(k) * (sd[k] - sd[k - 1] + m.dividends.increment(k));
      CHECK(phi_0.held(k) <= phi_d.held(k) + 1e-12);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("paying dividends never beats the twin market") {
  const TimeGrid g = TimeGrid::uniform(6, 1.0);
  const auto same = compare_dividend_policies(random_strategy(g, 3),
                                              DividendModel{ReturnPath(g, {0.1, -0.1, 0.05, 0.05, -0.2, 0.1}),
                                                            DividendPath::zero(g), 100.0},
                                              RatePath::constant(g, 0.02), 0.3, 500.0);
  CHECK(same.min_wealth_gap == 0.0);
  CHECK(same.max_wealth_gap == 0.0);

  const DividendModel rising{ReturnPath(g, {0.05, 0.05, 0.05, 0.05, 0.05, 0.05}),
                             DividendPath(g, {0, 0, 0, 10, 10, 10, 10}), 100.0};
  const ElementaryStrategy hold(g, {0, 1, 1, 1, 1, 1, 1}, 1.0);
  const auto c = compare_dividend_policies(hold, rising, RatePath::constant(g, 0.0), 0.3, 200.0);
  CHECK(c.rows.back().gap > 0.0);
  CHECK(c.violations == 0);

  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto m = random_dividend_model(seed, 20, 100.0);
    const auto phi = random_strategy(m.returns.grid, seed + 7);
    const auto cmp = compare_dividend_policies(phi, m, RatePath::constant(m.returns.grid, 0.05), 0.35, 1000.0);
    CHECK(cmp.violations == 0);
    CHECK(cmp.dominance_failures == 0);
    CHECK(cmp.min_wealth_gap >= -1e-9);
    CHECK(cmp.min_tax_gap >= -1e-9);
  }
  const std::string csv = comparison_csv(c);
  CHECK(csv.rfind("t,S_D,S_0,phi_D,phi_0,Pi_D,Pi_0,V_D,V_0,gap\n", 0) == 0);
  CHECK(comparison_summary_json(c).find("\"violation_count\": 0") != std::string::npos);
}

TEST_CASE("deferral beats immediate taxation") {
  const auto e = deferral_experiment(0.25, 0.05, 1.0, 2000);
  CHECK(e.deferred_closed == doctest::Approx(1.0 + 0.75 * (std::exp(0.05) - 1.0)));
  CHECK(e.immediate_closed == doctest::Approx(std::exp(0.0375)));
  CHECK(e.deferred_simulated == doctest::Approx(e.deferred_closed).epsilon(1e-12));
  CHECK(std::abs(e.immediate_simulated - e.immediate_closed) < 1e-6);
  CHECK(e.deferred_closed - e.immediate_closed > 2e-4);
}
