#include <doctest.h>

#include <cmath>
#include <limits>

#include "taxflow/error.hpp"
#include "taxflow/lot_ledger.hpp"
#include "taxflow/rng.hpp"

using namespace taxflow;

namespace {

PricePath integer_path(std::vector<double> v) {
  const std::size_t n = v.size() - 1;
  return PricePath(TimeGrid::integer(n), std::move(v));
}

// Tax of a lot matrix computed lot by lot: every share sold at u realizes
// S_u - S_s, and every share kept is charged nothing.
double naive_tax(const LotMatrix& n, const PricePath& s, double alpha, std::size_t t) {
  double pi = 0.0;
  for (std::size_t u = 1; u <= t; ++u)
    for (std::size_t b = 0; b < u; ++b) pi += alpha * (n(b, u - 1) - n(b, u)) * (s[u] - s[b]);
  return pi;
}

}  // namespace

TEST_CASE("two-lot example: losses are harvested immediately") {
  const auto s = integer_path({100, 103, 104, 105, 102});
  const DiscreteStrategy phi({9, 10, 14, 10, 10});
  const LotMatrix n = wash_optimal_strategy(phi, s);
  CHECK(validate(n, phi).ok);
  CHECK(n(0, 3) == 9);
  CHECK(n(1, 3) == 1);
  CHECK(n(2, 3) == 0);
  CHECK(n(3, 3) == 0);
  CHECK(n(0, 4) == 9);
  CHECK(n(1, 4) == 0);
  CHECK(n(4, 4) == 1);

  const double alpha = 0.3;
  const auto pi = tax_payments(n, s, alpha);
  CHECK(pi[0] == doctest::Approx(0.0));
  CHECK(pi[1] == doctest::Approx(0.0));
  CHECK(pi[2] == doctest::Approx(0.0));
  CHECK(pi[3] == doctest::Approx(4 * alpha));
  CHECK(pi[4] == doctest::Approx(3 * alpha));
  for (std::size_t t = 0; t < 5; ++t) CHECK(pi[t] == doctest::Approx(naive_tax(n, s, alpha, t)));
}

TEST_CASE("validation flags broken lot matrices") {
  const DiscreteStrategy phi({2, 3});
  LotMatrix n(1);
  n(0, 0) = 2;
  n(0, 1) = 3;  // grows
  n(1, 1) = 0;
  const auto r = validate(n, phi);
  CHECK_FALSE(r.ok);
  CHECK(!r.violations.empty());
  CHECK_THROWS(DiscreteStrategy({1.0, -1.0}));
}

TEST_CASE("tax identity: Pi = alpha * gains - alpha * integral of book profits") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng(seed);
    std::vector<double> prices{10};
    std::vector<double> pos;
    for (int t = 0; t < 12; ++t) {
      pos.push_back(static_cast<double>(rng.uniform_int(0, 6)));
      if (t < 11) prices.push_back(std::max(1.0, prices.back() + static_cast<double>(rng.uniform_int(-3, 3))));
    }
    const auto s = integer_path(prices);
    const DiscreteStrategy phi(pos);
    const LotMatrix n = wash_optimal_strategy(phi, s);
    REQUIRE(validate(n, phi).ok);
    const auto pi = tax_payments(n, s, 0.25);
    for (std::size_t t = 0; t < pos.size(); ++t) {
      const double rhs = 0.25 * trading_gains(phi, s, t) - 0.25 * book_profit_fn_discrete(n, s, t).integral();
      CHECK(pi[t] == doctest::Approx(rhs).epsilon(1e-12));
      CHECK(book_profit_fn_discrete(n, s, t).nonnegative());
    }
  }
}

TEST_CASE("exhaustive search agrees with the wash-sale rule on small lattices") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    Rng rng(seed, 7);
    const std::size_t last = 1 + static_cast<std::size_t>(rng.uniform_int(1, 3));
    std::vector<double> prices{5}, pos;
    for (std::size_t t = 0; t <= last; ++t) {
      pos.push_back(static_cast<double>(rng.uniform_int(0, 3)));
      if (t < last) prices.push_back(std::max(1.0, prices.back() + static_cast<double>(rng.uniform_int(-2, 2))));
    }
    const auto s = integer_path(prices);
    const DiscreteStrategy phi(pos);
    const auto best = brute_force_min_tax_all(phi, s, 0.4, 1.0);
    const auto pi = tax_payments(wash_optimal_strategy(phi, s), s, 0.4);
    for (std::size_t t = 0; t <= last; ++t) CHECK(pi[t] == doctest::Approx(best[t]).epsilon(1e-12));

    // Independent check of the dynamic program through plain enumeration.
    std::vector<double> enum_best(last + 1, std::numeric_limits<double>::infinity());
    enumerate_lot_matrices(phi, 1.0, [&](const LotMatrix& n) {
      for (std::size_t t = 0; t <= last; ++t) enum_best[t] = std::min(enum_best[t], naive_tax(n, s, 0.4, t));
    });
    for (std::size_t t = 0; t <= last; ++t) CHECK(best[t] == doctest::Approx(enum_best[t]).epsilon(1e-12));
  }
}

TEST_CASE("enumeration refuses horizons beyond the budget") {
  const auto s = integer_path({1, 1, 1, 1, 1, 1, 1});
  const DiscreteStrategy phi({1, 1, 1, 1, 1, 1, 1});
  CHECK_THROWS_AS(brute_force_min_tax_all(phi, s, 0.3, 1.0), Error);
}

TEST_CASE("incremental ledger reproduces the lot matrix") {
  const auto s = integer_path({100, 103, 104, 105, 102});
  const DiscreteStrategy phi({9, 10, 14, 10, 10});
  const auto replay = replay_ledger(phi, s, 0.3);
  const auto pi = tax_payments(wash_optimal_strategy(phi, s), s, 0.3);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(replay.accumulated_tax[t] == doctest::Approx(pi[t]));
    CHECK(replay.ledgers[t].position() == doctest::Approx(phi.after(t)));
  }
  const auto& last = replay.ledgers.back();
  for (std::size_t i = 1; i < last.lots.size(); ++i) CHECK(last.lots[i].basis >= last.lots[i - 1].basis);
  const std::string csv = ledger_csv(last);
  CHECK(csv.rfind("purchase_index,size,basis,book_profit\n", 0) == 0);
  CHECK(replay.wash_sold[4] == doctest::Approx(1.0));
}

namespace {

struct SmallInstance {
  PricePath prices;
  DiscreteStrategy phi;
};

SmallInstance random_instance(std::uint64_t seed, std::size_t max_last, long max_shares) {
  Rng rng(seed, 21);
  const std::size_t last = static_cast<std::size_t>(rng.uniform_int(1, static_cast<long>(max_last)));
  std::vector<double> prices{20}, pos;
  for (std::size_t t = 0; t <= last; ++t) {
    pos.push_back(static_cast<double>(rng.uniform_int(0, max_shares)));
    if (t < last) prices.push_back(std::max(1.0, prices.back() + static_cast<double>(rng.uniform_int(-4, 4))));
  }
  return {integer_path(prices), DiscreteStrategy(pos)};
}

// Book profits rebuilt by shifting the previous step function: sold shares
// leave from the low-profit end, survivors gain dS and are floored at zero,
// new shares enter at zero profit.
std::vector<ProfitSegment> recursive_profits(const std::vector<ProfitSegment>& prev, double change, double ds) {
  std::vector<ProfitSegment> out;
  double drop = std::max(0.0, -change);
  for (const auto& seg : prev) {
    const double keep = seg.width - std::min(seg.width, drop);
    drop -= seg.width - keep;
    if (keep > 0.0) out.push_back({keep, std::max(seg.profit + ds, 0.0)});
  }
  if (change > 0.0) out.insert(out.begin(), ProfitSegment{change, 0.0});
  return out;
}

}  // namespace

TEST_CASE("zero matrix is valid and pays nothing") {
  const auto s = integer_path({3, 1, 4});
  const DiscreteStrategy phi({0, 0, 0});
  const LotMatrix n(2);
  CHECK(validate(n, phi).ok);
  for (double p : tax_payments(n, s, 0.3)) CHECK(p == 0.0);
}

TEST_CASE("a single loss is harvested by a wash sale") {
  const auto s = integer_path({100, 90});
  const DiscreteStrategy phi({1, 1});
  const double alpha = 0.25;
  LotMatrix hold(1);
  hold(0, 0) = 1;
  hold(0, 1) = 1;
  CHECK(tax_payments(hold, s, alpha)[1] == 0.0);
  CHECK(brute_force_min_tax(phi, s, alpha, 1, 1.0) == -10 * alpha);
  CHECK(tax_payments(wash_optimal_strategy(phi, s), s, alpha)[1] == -10 * alpha);
}

TEST_CASE("two-lot example: exhaustive minimum and profile") {
  const auto s = integer_path({100, 103, 104, 105, 102});
  const DiscreteStrategy phi({9, 10, 14, 10, 10});
  CHECK(brute_force_min_tax(phi, s, 0.25, 4, 1.0) == 0.75);
  const LotMatrix n = wash_optimal_strategy(phi, s);
  CHECK(book_profit_fn_discrete(n, s, 0).segments() == std::vector<ProfitSegment>{{9, 0}});
  CHECK(book_profit_fn_discrete(n, s, 4).normalized().segments() == std::vector<ProfitSegment>{{1, 0}, {9, 2}});
}

TEST_CASE("falling prices wash-sell every lot") {
  const auto s = integer_path({50, 48, 45, 45, 40});
  const DiscreteStrategy phi({3, 3, 3, 3, 3});
  const auto replay = replay_ledger(phi, s, 0.3);
  CHECK(replay.wash_sold[1] == 3);
  CHECK(replay.wash_sold[2] == 3);
  CHECK(replay.wash_sold[3] == 0);  // equal price keeps the lot
  CHECK(replay.wash_sold[4] == 3);
  for (std::size_t t = 0; t < 5; ++t)
    for (const auto& lot : replay.ledgers[t].lots) CHECK(lot.basis == s[t]);
  const LotMatrix n = wash_optimal_strategy(phi, s);
  CHECK(n(4, 4) == 3);
  CHECK(n(0, 1) == 0);
}

TEST_CASE("single ledger steps") {
  const double alpha = 0.25;
  LotLedger l;
  l = ledger_step(l, 100, 9, alpha).ledger;
  l = ledger_step(l, 103, 1, alpha).ledger;
  const LedgerStep same = ledger_step(l, 103, 0, alpha);
  CHECK(same.tax == 0.0);
  CHECK(same.ledger.lots.size() == l.lots.size());
  for (std::size_t i = 0; i < l.lots.size(); ++i) CHECK(same.ledger.lots[i].basis == l.lots[i].basis);
  l = ledger_step(l, 104, 4, alpha).ledger;
  const LedgerStep sell = ledger_step(l, 105, -4, alpha);
  CHECK(sell.tax == 4 * alpha);
  const LedgerStep wash = ledger_step(sell.ledger, 102, 0, alpha);
  CHECK(wash.tax == -alpha);
  CHECK(wash.wash_sold == 1);
  CHECK_THROWS_AS(ledger_step(wash.ledger, 100, -11, alpha), Error);
}

TEST_CASE("ledger bases follow the running minimum since purchase") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto inst = random_instance(seed, 10, 6);
    const auto replay = replay_ledger(inst.phi, inst.prices, 0.3);
    const auto pi = tax_payments(wash_optimal_strategy(inst.phi, inst.prices), inst.prices, 0.3);
    for (std::size_t t = 0; t < replay.ledgers.size(); ++t) {
      CHECK(replay.accumulated_tax[t] == pi[t]);
      const auto& lots = replay.ledgers[t].lots;
      for (std::size_t i = 0; i < lots.size(); ++i) {
        double m = inst.prices[lots[i].purchase_index];
        for (std::size_t u = lots[i].purchase_index; u <= t; ++u) m = std::min(m, inst.prices[u]);
        CHECK(lots[i].basis == m);
        if (i > 0) CHECK(lots[i].basis >= lots[i - 1].basis);
      }
    }
  }
}

TEST_CASE("wash-sale book profits obey the one-step recursion") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto inst = random_instance(seed, 10, 6);
    const LotMatrix n = wash_optimal_strategy(inst.phi, inst.prices);
    std::vector<ProfitSegment> f;
    for (std::size_t t = 0; t <= inst.phi.last_index(); ++t) {
      const double ds = t == 0 ? 0.0 : inst.prices[t] - inst.prices[t - 1];
      f = recursive_profits(f, inst.phi.change(t), ds);
      const BookProfitFunction engine = book_profit_fn_discrete(n, inst.prices, t);
      CHECK(engine.nondecreasing());
      CHECK(engine.nonnegative());
      CHECK(engine.normalized().segments() == BookProfitFunction(f).normalized().segments());
    }
  }
}

TEST_CASE("minimal tax is positively homogeneous and subadditive") {
  const double alpha = 0.25;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto a = random_instance(seed, 3, 2);
    const auto b = random_instance(seed + 1000, 3, 2);
    const std::size_t last = a.phi.last_index();

    std::vector<double> twice;
    for (double v : a.phi.phi) twice.push_back(2 * v);
    const auto base = brute_force_min_tax_all(a.phi, a.prices, alpha, 1.0);
    const auto scaled = brute_force_min_tax_all(DiscreteStrategy(twice), a.prices, alpha, 1.0);
    for (std::size_t t = 0; t <= last; ++t) CHECK(scaled[t] == 2 * base[t]);

    // Second strategy on the same prices, truncated or padded to the same horizon.
    std::vector<double> other(last + 1, 0.0), sum(last + 1, 0.0);
    for (std::size_t t = 0; t <= last; ++t) {
      other[t] = t <= b.phi.last_index() ? b.phi.phi[t] : b.phi.phi.back();
      sum[t] = a.phi.phi[t] + other[t];
    }
    const auto m2 = brute_force_min_tax_all(DiscreteStrategy(other), a.prices, alpha, 1.0);
    const auto ms = brute_force_min_tax_all(DiscreteStrategy(sum), a.prices, alpha, 1.0);
    for (std::size_t t = 0; t <= last; ++t) CHECK(ms[t] <= base[t] + m2[t] + 1e-12);
  }
}

TEST_CASE("growing positions: exhaustive minimum equals the wash-sale rule") {
  const auto s = integer_path({10, 7, 9, 6, 8});
  const DiscreteStrategy phi({1, 2, 2, 3, 4});
  const auto best = brute_force_min_tax_all(phi, s, 0.3, 1.0);
  const auto pi = tax_payments(wash_optimal_strategy(phi, s), s, 0.3);
  for (std::size_t t = 0; t < 5; ++t) CHECK(pi[t] == doctest::Approx(best[t]).epsilon(1e-12));
}
