#include <doctest.h>

#include <cmath>

#include "taxflow/efficient_strategies.hpp"
#include "taxflow/error.hpp"

using namespace taxflow;

namespace {

double simpson(const FeedbackRule& g, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double acc = g(a) + g(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
  return acc * h / 3.0;
}

PricePath path(std::vector<double> v) {
  const std::size_t n = v.size() - 1;
  return PricePath(TimeGrid::uniform(n, 1.0), std::move(v));
}

}  // namespace

TEST_CASE("rules: antiderivative, inverse and monotonicity") {
  const FeedbackRule rules[] = {FeedbackRule::linear(2.0, 1.0), FeedbackRule::power(0.5, 1.5),
                                FeedbackRule::tabulated({10, 50, 90, 130}, {0, 4, 4, 10})};
  for (const auto& g : rules) {
    // Piecewise-linear tables are integrated exactly by Simpson on each node interval.
    for (auto [a, b] : {std::pair{10.0, 50.0}, std::pair{50.0, 90.0}, std::pair{90.0, 130.0}})
      CHECK(g.antiderivative(b) - g.antiderivative(a) == doctest::Approx(simpson(g, a, b)).epsilon(1e-11));
    for (double s : {12.0, 60.0, 100.0}) CHECK(g.inverse(g(s)) >= s - 1e-9);
  }
  const auto flat = FeedbackRule::tabulated({0, 1, 2, 3}, {0, 1, 1, 2});
  CHECK(flat.inverse(1.0) == 2.0);
  CHECK(flat.inverse(0.5) == doctest::Approx(0.5));
  CHECK(std::isinf(flat.inverse(2.0)));
  CHECK_THROWS_AS(FeedbackRule::tabulated({0, 1, 2}, {3, 2, 1}), Error);
  CHECK_THROWS_AS(FeedbackRule::linear(-1.0, 5.0), Error);
  CHECK(FeedbackRule::linear(1.0).derivative(7.0) == 1.0);
}

TEST_CASE("closed-form book profit") {
  const auto g = FeedbackRule::linear(1.0);
  const auto s = path({100, 105, 103});
  CHECK(closed_form_book_profit(g, s, 2, 1.0) == doctest::Approx(1.0));
  CHECK(closed_form_book_profit(g, s, 2, 104.0) == 0.0);
  CHECK(closed_form_book_profit(g, s, 2, 102.0) == doctest::Approx(3.0));
  const auto low = path({100, 98, 95});
  CHECK(closed_form_book_profit(g, low, 2, 94.999) == 0.0);
  CHECK_THROWS(closed_form_book_profit(g, s, 2, -1.0));
}

TEST_CASE("closed form meets the grid engine at segment boundaries") {
  const FeedbackRule rules[] = {FeedbackRule::linear(1.0), FeedbackRule::power(0.5, 1.5)};
  for (const auto& rule : rules) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto s = gen_crr(100.0, 2.0, 400, 1.0, seed);
      const auto phi = feedback_strategy(rule, s);
      const BookProfitIndex index(phi, s);
      const double tick = 2.0 / 20.0;
      for (std::size_t k = 0; k < s.size(); k += 7) {
        const auto f = index.function(k, Side::Right);
        double a = 0.0;
        for (const auto& seg : f.segments()) {
          CHECK(closed_form_book_profit(rule, s, k, a) == doctest::Approx(f.evaluate_right(a)).epsilon(1e-9));
          CHECK(std::abs(closed_form_book_profit(rule, s, k, a + seg.width / 2) - seg.profit) <= tick + 1e-9);
          a += seg.width;
        }
      }
    }
  }
}

TEST_CASE("closed-form tax flow") {
  const auto g = FeedbackRule::linear(1.0);
  const auto constant = closed_form_tax(g, path({50, 50, 50, 50}), 0.3);
  for (double v : constant.flow.at) CHECK(v == 0.0);

  const auto up = path({50, 51, 53, 53, 56});
  const auto rising = closed_form_tax(g, up, 0.3);
  for (std::size_t k = 0; k < up.size(); ++k) {
    CHECK(rising.flow.at[k] == doctest::Approx(-0.15 * rising.covariation[k]));
    if (k > 0) CHECK(rising.flow.at[k] <= rising.flow.at[k - 1]);
  }

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = gen_crr(100.0, 0.2, 800, 1.0, seed);
    const auto cf = closed_form_tax(g, s, 0.25);
    const auto phi = feedback_strategy(g, s);
    double gains = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k > 0) {
        CHECK(cf.minimum_part[k] <= cf.minimum_part[k - 1]);
        CHECK(cf.covariation[k] >= cf.covariation[k - 1]);
        gains += phi.held(k) * (s[k] - s[k - 1]);
      }
      CHECK(cf.flow.at[k] <= 0.0);
      // For linear rules the grid identity is exact.
      const double identity = 0.25 * gains - 0.25 * (g.antiderivative(s[k]) - g.antiderivative(s.running_min(k)));
      CHECK(identity == doctest::Approx(cf.flow.at[k]).epsilon(1e-9).scale(1.0));
    }
    const auto liq = closed_form_tax(g, s, 0.25, true);
    CHECK(liq.flow.right.back() >= liq.flow.at.back());
  }
}

TEST_CASE("per-step tax of a feedback rule on a binomial path") {
  const FeedbackRule rules[] = {FeedbackRule::linear(1.0), FeedbackRule::power(0.5, 1.5)};
  for (const auto& rule : rules) {
    const auto s = gen_crr(100.0, 0.2, 500, 1.0, 3);
    const auto flow = tax_process_elementary(feedback_strategy(rule, s), s, DividendPath::zero(s.grid), 0.3);
    double low = s[0];
    for (std::size_t k = 1; k < s.size(); ++k) {
      const double ds = s[k] - s[k - 1];
      double expected = 0.0;
      if (ds < 0.0) expected = s[k] >= low ? -0.3 * (rule(s[k - 1]) - rule(s[k])) * -ds : -0.3 * -ds * rule(s[k - 1]);
      CHECK(flow.right[k] - flow.right[k - 1] == doctest::Approx(expected).epsilon(1e-9).scale(1e-6));
      low = std::min(low, s[k]);
    }
  }
}

TEST_CASE("quadratic covariation") {
  const auto s = gen_crr(100.0, 0.2, 400, 1.0, 9);
  const ElementaryStrategy flat(s.grid, [&] {
    std::vector<double> v(s.size(), 2.0);
    v[0] = 0.0;
    return v;
  }(), 2.0);
  for (std::size_t k = 2; k < s.size(); ++k) CHECK(quadratic_covariation(flat, s)[k] == 0.0);
  const auto cov = quadratic_covariation(feedback_strategy(FeedbackRule::linear(1.0), s), s);
  CHECK(cov.back() == doctest::Approx(0.04).epsilon(1e-9));
  for (std::size_t k = 1; k < cov.size(); ++k) CHECK(cov[k] >= cov[k - 1]);

  // Decreasing response: covariation turns negative and the closed forms do not apply.
  std::vector<double> after(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) after[k] = std::max(0.0, 200.0 - s[k]);
  const auto anti = ElementaryStrategy::from_after_trade(s.grid, after);
  const auto anti_cov = quadratic_covariation(anti, s);
  for (std::size_t k = 1; k < anti_cov.size(); ++k) CHECK(anti_cov[k] <= anti_cov[k - 1]);
  CHECK_FALSE(monotone_response(anti, s));
  CHECK(monotone_response(feedback_strategy(FeedbackRule::power(1.0, 2.0), s), s));
}

TEST_CASE("convergence and refinement studies are deterministic") {
  CrrSetup setup;
  setup.paths = 8;
  const auto a = convergence_study(FeedbackRule::linear(1.0), setup, {50, 100});
  setup.threads = 3;
  const auto b = convergence_study(FeedbackRule::linear(1.0), setup, {50, 100});
  CHECK(convergence_csv(a) == convergence_csv(b));
  CHECK(a.closed_form_nonpositive);
  CHECK(a.scale == doctest::Approx(0.25 * 0.04 / 2));
  const auto r1 = refinement_study(FeedbackRule::linear(1.0), setup, 256, {8, 16, 32});
  setup.threads = 1;
  const auto r2 = refinement_study(FeedbackRule::linear(1.0), setup, 256, {8, 16, 32});
  CHECK(refinement_csv(r1) == refinement_csv(r2));
  CHECK(r1.size() == 2);
  CHECK_THROWS(refinement_study(FeedbackRule::linear(1.0), setup, 100, {8, 16}));
  CHECK(quantile({3, 1, 2}, 0.5) == 2.0);
}
