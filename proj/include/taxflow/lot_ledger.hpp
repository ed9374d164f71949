#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "taxflow/book_profit.hpp"
#include "taxflow/market_paths.hpp"

namespace taxflow {

/// Positions phi_1, ..., phi_{T+1}: phi[t] shares are held after trading at
/// time t. The position before any trade is 0.
struct DiscreteStrategy {
  std::vector<double> phi;

  explicit DiscreteStrategy(std::vector<double> after_trade);

  std::size_t last_index() const noexcept { return phi.size() - 1; }
  double after(std::size_t t) const { return phi[t]; }
  double before(std::size_t t) const { return t == 0 ? 0.0 : phi[t - 1]; }
  /// phi_{t+1} - phi_t.
  double change(std::size_t t) const { return after(t) - before(t); }
};

/// N(s, t): shares bought at time s and still held after trading at time t, s <= t.
class LotMatrix {
 public:
  LotMatrix() = default;
  explicit LotMatrix(std::size_t last_index);

  std::size_t last_index() const noexcept { return rows_.size() - 1; }
  double operator()(std::size_t s, std::size_t t) const { return rows_[s][t - s]; }
  double& operator()(std::size_t s, std::size_t t) { return rows_[s][t - s]; }

  /// sum_s N(s, t) = phi_{t+1}.
  double position(std::size_t t) const;

 private:
  std::vector<std::vector<double>> rows_;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
  explicit operator bool() const noexcept { return ok; }
};

/// Checks lot monotonicity N(t,t) >= N(t,t+1) >= ... >= 0 and that the lots
/// add up to the strategy. Position sums are compared with a relative
/// tolerance of 1e-12 to absorb summation rounding.
ValidationReport validate(const LotMatrix& n, const DiscreteStrategy& phi);

/// The tax-minimizing lot choice: reduce the position by selling the most
/// recently bought shares, then sell and rebuy every lot standing at a loss.
LotMatrix wash_optimal_strategy(const DiscreteStrategy& phi, const PricePath& prices);

/// Accumulated tax payments Pi_0, ..., Pi_T of a lot matrix.
std::vector<double> tax_payments(const LotMatrix& n, const PricePath& prices, double alpha);

/// Book profit function after the regrouping at time t, lots ordered by
/// descending purchase price (ties: latest purchase first).
BookProfitFunction book_profit_fn_discrete(const LotMatrix& n, const PricePath& prices, std::size_t t);

/// Trading gains sum_{u<=t} phi_u (S_u - S_{u-1}).
double trading_gains(const DiscreteStrategy& phi, const PricePath& prices, std::size_t t);

// ---------------------------------------------------------------------------
// Incremental ledger

struct Lot {
  std::size_t purchase_index = 0;
  double size = 0.0;
  double basis = 0.0;  // wash-sale adjusted
};

struct LotLedger {
  std::size_t steps = 0;  // number of ledger_step calls applied so far
  double price = 0.0;     // last marked price
  std::vector<Lot> lots;  // ascending purchase_index

  double position() const;
  /// Lot profits as a step function (lowest profit first).
  BookProfitFunction book_profits() const;
};

struct LedgerStep {
  LotLedger ledger;
  double tax = 0.0;       // signed tax increment
  double sale_tax = 0.0;  // from reducing the position
  double wash_tax = 0.0;  // from wash sales (<= 0)
  double wash_sold = 0.0; // shares sold and rebought
  double realized_gain = 0.0;  // untaxed gain behind `tax`
};

/// Marks to new_price, sells -delta_phi shares newest first, wash-sells every
/// lot whose basis exceeds new_price (basis reset), then buys delta_phi new
/// shares if delta_phi > 0.
LedgerStep ledger_step(const LotLedger& ledger, double new_price, double delta_phi, double alpha);

/// Replays a whole strategy; element t is the ledger after trading at time t.
struct LedgerReplay {
  std::vector<LotLedger> ledgers;
  std::vector<double> accumulated_tax;
  std::vector<double> wash_sold;
};
LedgerReplay replay_ledger(const DiscreteStrategy& phi, const PricePath& prices, double alpha);

/// CSV rows (purchase_index,size,basis,book_profit) with a header line.
std::string ledger_csv(const LotLedger& ledger);

// ---------------------------------------------------------------------------
// Exhaustive oracle

/// Lattice enumeration limits. The number of lot matrices grows roughly like
/// prod_t (phi_t / quantum + 1)^t, so instances should stay at T <= 5 with a
/// handful of lattice units per position.
struct EnumerationBudget {
  std::size_t max_transitions = 20'000'000;
  std::size_t max_last_index = 5;
};

/// min over all valid lattice lot matrices of Pi_t, for every t = 0..T.
std::vector<double> brute_force_min_tax_all(const DiscreteStrategy& phi, const PricePath& prices, double alpha,
                                            double quantum, const EnumerationBudget& budget = {});

double brute_force_min_tax(const DiscreteStrategy& phi, const PricePath& prices, double alpha, std::size_t t,
                           double quantum, const EnumerationBudget& budget = {});

/// Calls visit for every valid lattice lot matrix of phi.
void enumerate_lot_matrices(const DiscreteStrategy& phi, double quantum,
                            const std::function<void(const LotMatrix&)>& visit,
                            const EnumerationBudget& budget = {});

}  // namespace taxflow
