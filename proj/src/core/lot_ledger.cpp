#include "taxflow/lot_ledger.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "taxflow/error.hpp"

namespace taxflow {

namespace {

void require_matching(const LotMatrix& n, const PricePath& prices) {
  require(prices.size() == n.last_index() + 1, "lot matrix and price path cover different horizons");
}

std::vector<long> to_lattice(const DiscreteStrategy& phi, double quantum) {
  require(quantum > 0.0, "quantum must be positive");
  std::vector<long> units(phi.phi.size());
  for (std::size_t t = 0; t < units.size(); ++t) {
    const double u = phi.phi[t] / quantum;
    const double r = std::round(u);
    if (std::abs(u - r) > 1e-9)
      fail(ErrorCode::InvalidArgument, "position at index " + std::to_string(t) + " is not a multiple of the quantum");
    units[t] = static_cast<long>(r);
  }
  return units;
}

void check_enumerable(const DiscreteStrategy& phi, const PricePath& prices, const EnumerationBudget& budget) {
  require(prices.size() == phi.phi.size(), "strategy and price path cover different horizons");
  if (phi.last_index() > budget.max_last_index)
    fail(ErrorCode::BudgetExceeded, "horizon " + std::to_string(phi.last_index()) + " exceeds enumeration limit " +
                                        std::to_string(budget.max_last_index));
}

}  // namespace

DiscreteStrategy::DiscreteStrategy(std::vector<double> after_trade) : phi(std::move(after_trade)) {
  require(!phi.empty(), "strategy must cover at least one trading date");
  for (std::size_t t = 0; t < phi.size(); ++t)
    if (!(phi[t] >= 0.0))
      fail(ErrorCode::InvalidArgument, "short position (or NaN) at index " + std::to_string(t));
}

LotMatrix::LotMatrix(std::size_t last_index) : rows_(last_index + 1) {
  for (std::size_t s = 0; s <= last_index; ++s) rows_[s].assign(last_index + 1 - s, 0.0);
}

double LotMatrix::position(std::size_t t) const {
  double sum = 0.0;
  for (std::size_t s = 0; s <= t; ++s) sum += (*this)(s, t);
  return sum;
}

ValidationReport validate(const LotMatrix& n, const DiscreteStrategy& phi) {
  ValidationReport report;
  auto violation = [&](std::string msg) {
    report.ok = false;
    report.violations.push_back(std::move(msg));
  };
  if (n.last_index() != phi.last_index()) {
    violation("shape mismatch: lot matrix horizon " + std::to_string(n.last_index()) + ", strategy horizon " +
              std::to_string(phi.last_index()));
    return report;
  }
  const std::size_t last = n.last_index();
  for (std::size_t s = 0; s <= last; ++s) {
    for (std::size_t t = s; t <= last; ++t) {
      if (!(n(s, t) >= 0.0)) violation(fmt::format("N({},{}) = {} is negative", s, t, n(s, t)));
      if (t > s && n(s, t) > n(s, t - 1))
        violation(fmt::format("N({},{}) = {} exceeds N({},{}) = {}", s, t, n(s, t), s, t - 1, n(s, t - 1)));
    }
  }
  for (std::size_t t = 0; t <= last; ++t) {
    const double pos = n.position(t);
    if (std::abs(pos - phi.after(t)) > 1e-12 * std::max(1.0, std::abs(phi.after(t))))
      violation(fmt::format("lots after trading at {} sum to {}, strategy holds {}", t, pos, phi.after(t)));
  }
  return report;
}

LotMatrix wash_optimal_strategy(const DiscreteStrategy& phi, const PricePath& prices) {
  require(prices.size() == phi.phi.size(), "strategy and price path cover different horizons");
  const std::size_t last = phi.last_index();
  LotMatrix n(last);
  n(0, 0) = phi.after(0);
  for (std::size_t t = 1; t <= last; ++t) {
    const double reduction = std::max(0.0, -phi.change(t));
    // newer(s) = sum_{j=s+1}^{t-1} N(j, t-1), accumulated from the newest lot backwards.
    double newer = 0.0;
    double kept = 0.0;
    for (std::size_t s = t; s-- > 0;) {
      const double held = n(s, t - 1);
      const double sold = std::max(0.0, reduction - newer);
      const double remaining = std::max(0.0, held - sold);
      n(s, t) = prices[t] >= prices[s] ? remaining : 0.0;
      kept += n(s, t);
      newer += held;
    }
    n(t, t) = std::max(0.0, phi.after(t) - kept);
  }
  return n;
}

std::vector<double> tax_payments(const LotMatrix& n, const PricePath& prices, double alpha) {
  require_matching(n, prices);
  const std::size_t last = n.last_index();
  std::vector<double> pi(last + 1, 0.0);
  double realized = 0.0;
  for (std::size_t t = 1; t <= last; ++t) {
    for (std::size_t s = 0; s < t; ++s) realized += (n(s, t - 1) - n(s, t)) * (prices[t] - prices[s]);
    pi[t] = alpha * realized;
  }
  return pi;
}

BookProfitFunction book_profit_fn_discrete(const LotMatrix& n, const PricePath& prices, std::size_t t) {
  require_matching(n, prices);
  require(t <= n.last_index(), "book_profit_fn_discrete: time index out of range");
  std::vector<std::size_t> order(t + 1);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (prices[a] != prices[b]) return prices[a] > prices[b];
    return a > b;
  });
  std::vector<ProfitSegment> segs;
  for (std::size_t s : order) {
    if (n(s, t) > 0.0) segs.push_back({n(s, t), prices[t] - prices[s]});
  }
  return BookProfitFunction(std::move(segs));
}

double trading_gains(const DiscreteStrategy& phi, const PricePath& prices, std::size_t t) {
  double g = 0.0;
  for (std::size_t u = 1; u <= t; ++u) g += phi.before(u) * (prices[u] - prices[u - 1]);
  return g;
}

double LotLedger::position() const {
  double p = 0.0;
  for (const auto& lot : lots) p += lot.size;
  return p;
}

BookProfitFunction LotLedger::book_profits() const {
  // Bases are nondecreasing in purchase_index, so newest lots carry the lowest profit.
  std::vector<ProfitSegment> segs;
  for (auto it = lots.rbegin(); it != lots.rend(); ++it) segs.push_back({it->size, price - it->basis});
  return BookProfitFunction(std::move(segs));
}

LedgerStep ledger_step(const LotLedger& ledger, double new_price, double delta_phi, double alpha) {
  require(new_price >= 0.0, "ledger_step: negative price");
  LedgerStep out;
  out.ledger = ledger;
  LotLedger& next = out.ledger;
  next.price = new_price;
  const double held = ledger.position();
  if (held + delta_phi < -1e-12 * std::max(1.0, held))
    fail(ErrorCode::InvalidArgument,
         fmt::format("ledger_step: selling {} of {} shares would open a short position", -delta_phi, held));

  if (delta_phi < 0.0) {
    double remaining = -delta_phi;
    while (remaining > 0.0 && !next.lots.empty()) {
      Lot& lot = next.lots.back();
      const double take = std::min(lot.size, remaining);
      out.realized_gain += take * (new_price - lot.basis);
      out.sale_tax += alpha * take * (new_price - lot.basis);
      lot.size -= take;
      remaining -= take;
      if (lot.size <= 1e-12 * std::max(1.0, held)) next.lots.pop_back();
    }
  }
  for (Lot& lot : next.lots) {
    if (lot.basis > new_price) {
      out.realized_gain += lot.size * (new_price - lot.basis);
      out.wash_tax += alpha * lot.size * (new_price - lot.basis);
      out.wash_sold += lot.size;
      lot.basis = new_price;
    }
  }
  if (delta_phi > 0.0) next.lots.push_back({next.steps, delta_phi, new_price});
  ++next.steps;
  out.tax = out.sale_tax + out.wash_tax;
  return out;
}

LedgerReplay replay_ledger(const DiscreteStrategy& phi, const PricePath& prices, double alpha) {
  require(prices.size() == phi.phi.size(), "strategy and price path cover different horizons");
  LedgerReplay replay;
  LotLedger ledger;
  double acc = 0.0;
  for (std::size_t t = 0; t <= phi.last_index(); ++t) {
    LedgerStep step = ledger_step(ledger, prices[t], phi.change(t), alpha);
    acc += step.realized_gain;
    ledger = std::move(step.ledger);
    replay.ledgers.push_back(ledger);
    replay.accumulated_tax.push_back(alpha * acc);
    replay.wash_sold.push_back(step.wash_sold);
  }
  return replay;
}

std::string ledger_csv(const LotLedger& ledger) {
  std::ostringstream os;
  os << "purchase_index,size,basis,book_profit\n";
  for (const auto& lot : ledger.lots)
    os << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", lot.purchase_index, lot.size, lot.basis,
                      ledger.price - lot.basis);
  return os.str();
}

std::vector<double> brute_force_min_tax_all(const DiscreteStrategy& phi, const PricePath& prices, double alpha,
                                            double quantum, const EnumerationBudget& budget) {
  check_enumerable(phi, prices, budget);
  const std::vector<long> units = to_lattice(phi, quantum);
  const std::size_t last = phi.last_index();

  // A state lists the lattice units still held per purchase date; the future
  // tax only depends on the state, so the minimal cost per state suffices.
  std::map<std::vector<long>, double> states{{{units[0]}, 0.0}};
  std::vector<double> best(last + 1, 0.0);
  std::size_t transitions = 0;

  for (std::size_t t = 1; t <= last; ++t) {
    std::map<std::vector<long>, double> next;
    for (const auto& [held, cost] : states) {
      std::vector<long> keep(t, 0);
      // Depth-first over the number kept from each purchase date s < t.
      auto recurse = [&](auto&& self, std::size_t s, long kept, double tax) -> void {
        if (s == t) {
          const long fresh = units[t] - kept;
          if (fresh < 0) return;
          if (++transitions > budget.max_transitions)
            fail(ErrorCode::BudgetExceeded, "brute force enumeration exceeded its transition budget");
          std::vector<long> state = keep;
          state.push_back(fresh);
          const double total = cost + alpha * tax;
          auto [it, inserted] = next.emplace(std::move(state), total);
          if (!inserted && total < it->second) it->second = total;
          return;
        }
        for (long k = 0; k <= held[s] && kept + k <= units[t]; ++k) {
          keep[s] = k;
          const double sold = static_cast<double>(held[s] - k) * quantum;
          self(self, s + 1, kept + k, tax + sold * (prices[t] - prices[s]));
        }
        keep[s] = 0;
      };
      recurse(recurse, 0, 0, 0.0);
    }
    states = std::move(next);
    double m = states.begin()->second;
    for (const auto& kv : states) m = std::min(m, kv.second);
    best[t] = m;
  }
  return best;
}

double brute_force_min_tax(const DiscreteStrategy& phi, const PricePath& prices, double alpha, std::size_t t,
                           double quantum, const EnumerationBudget& budget) {
  require(t <= phi.last_index(), "brute_force_min_tax: time index out of range");
  return brute_force_min_tax_all(phi, prices, alpha, quantum, budget)[t];
}

void enumerate_lot_matrices(const DiscreteStrategy& phi, double quantum,
                            const std::function<void(const LotMatrix&)>& visit, const EnumerationBudget& budget) {
  if (phi.last_index() > budget.max_last_index)
    fail(ErrorCode::BudgetExceeded, "horizon exceeds enumeration limit");
  const std::vector<long> units = to_lattice(phi, quantum);
  const std::size_t last = phi.last_index();
  LotMatrix n(last);
  std::size_t visited = 0;

  auto fill = [&](auto&& self, std::size_t t, std::size_t s, double kept) -> void {
    if (t > last) {
      if (++visited > budget.max_transitions) fail(ErrorCode::BudgetExceeded, "lot matrix enumeration exceeded budget");
      visit(n);
      return;
    }
    const double target = static_cast<double>(units[t]) * quantum;
    if (s == t) {
      const double fresh = target - kept;
      if (fresh < -1e-12) return;
      n(t, t) = std::max(0.0, fresh);
      self(self, t + 1, 0, 0.0);
      return;
    }
    const long cap = std::lround(n(s, t - 1) / quantum);
    for (long k = 0; k <= cap; ++k) {
      const double v = static_cast<double>(k) * quantum;
      if (kept + v > target + 1e-12) break;
      n(s, t) = v;
      self(self, t, s + 1, kept + v);
    }
    n(s, t) = 0.0;
  };
  fill(fill, 0, 0, 0.0);
}

}  // namespace taxflow
