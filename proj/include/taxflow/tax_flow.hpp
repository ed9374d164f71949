#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "taxflow/book_profit.hpp"
#include "taxflow/lot_ledger.hpp"
#include "taxflow/market_paths.hpp"

namespace taxflow {

/// Left-continuous piecewise-constant share count on a grid.
///
/// phi[0] = 0 is the position at time 0; phi[k] (k >= 1) is held on
/// (t_{k-1}, t_k]. The right limit at t_k is phi[k+1], and at the horizon it
/// is `terminal` (the position after the last regrouping).
class ElementaryStrategy {
 public:
  ElementaryStrategy(TimeGrid grid, std::vector<double> phi, std::optional<double> terminal = std::nullopt);

  /// Embeds phi_1..phi_{T+1} on the integer grid 0..T.
  static ElementaryStrategy from_discrete(const DiscreteStrategy& d);
  /// phi_{t_k+} = after[k]; the inverse of to_discrete.
  static ElementaryStrategy from_after_trade(TimeGrid grid, const std::vector<double>& after);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return phi_.size(); }
  const std::vector<double>& values() const noexcept { return phi_; }
  double held(std::size_t k) const { return phi_[k]; }
  double after(std::size_t k) const { return k + 1 < phi_.size() ? phi_[k + 1] : terminal_; }
  double terminal() const noexcept { return terminal_; }
  /// Right jump phi_{t+} - phi_t at grid point k.
  double right_jump(std::size_t k) const { return after(k) - held(k); }

  /// Positions after each regrouping, phi_{t_k+}.
  DiscreteStrategy to_discrete() const;

  ElementaryStrategy scaled(double lambda) const;
  ElementaryStrategy plus(const ElementaryStrategy& other) const;

 private:
  TimeGrid grid_;
  std::vector<double> phi_;
  double terminal_;
};

/// Which one-sided value at a grid time: t-, t or t+.
enum class Side { Left, At, Right };

/// Accumulated tax payments with left value, value and right value at each grid point.
struct TaxFlow {
  TimeGrid grid;
  std::vector<double> left;
  std::vector<double> at;
  std::vector<double> right;

  explicit TaxFlow(TimeGrid g);
  std::size_t size() const noexcept { return at.size(); }
  double value(std::size_t k, Side side) const;
};

/// Per-grid-point pieces of the elementary tax formula (already multiplied by alpha).
struct TaxComponents {
  std::vector<double> sale;      // realized by reducing the position at t_k (right jump)
  std::vector<double> wash;      // loss realization over (t_{k-1}, t_k] (<= 0)
  std::vector<double> dividend;  // tax on dividends paid at t_k (>= 0)
};

/// Purchase time index of the x-th share at grid time k (largest label = oldest).
std::size_t purchase_time(const ElementaryStrategy& phi, std::size_t k, double x);

/// F(t_k, x) = S_k - min over [tau, t_k] of S.
double book_profit(const ElementaryStrategy& phi, const PricePath& prices, std::size_t k, double x);

/// The whole step function x -> F(t_k side, x).
BookProfitFunction book_profit_function(const ElementaryStrategy& phi, const PricePath& prices, std::size_t k,
                                        Side side = Side::At);

double book_profit_integral(const ElementaryStrategy& phi, const PricePath& prices, std::size_t k,
                            Side side = Side::At);

/// Precomputed lookups for building F at many grid times of one path.
/// Costs O(n log n) once, then O(number of segments) per query. Keeps
/// references: phi and prices must outlive the index.
class BookProfitIndex {
 public:
  BookProfitIndex(const ElementaryStrategy& phi, const PricePath& prices);

  BookProfitFunction function(std::size_t k, Side side = Side::At) const;
  double integral(std::size_t k, Side side = Side::At) const;

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  double range_min(std::size_t a, std::size_t b) const;
  template <class Visit>
  void walk(double top, std::size_t first, std::size_t window_end, Visit&& visit) const;
  std::size_t first_record(std::size_t k, Side side) const;

  const ElementaryStrategy* phi_;
  const PricePath* prices_;
  std::vector<std::size_t> prev_smaller_;
  std::vector<std::vector<double>> sparse_min_;
};

/// Tax process of an elementary strategy computed term by term.
TaxFlow tax_process_elementary(const ElementaryStrategy& phi, const PricePath& prices, const DividendPath& dividends,
                               double alpha, TaxComponents* components = nullptr);

/// Same process through alpha*(phi . (S + D)) - alpha * integral of F.
TaxFlow tax_process_via_identity(const ElementaryStrategy& phi, const PricePath& prices,
                                 const DividendPath& dividends, double alpha);

struct JumpParts {
  double delta_minus = 0.0;  // Pi_t - Pi_{t-}
  double delta_plus = 0.0;   // Pi_{t+} - Pi_t
  double wash_part = 0.0;    // <= 0
  double dividend_part = 0.0;  // >= 0
  double wash_sold_shares = 0.0;
};

/// Left and right jumps of Pi at grid point k from the jump formulas.
JumpParts jump_decomposition(const ElementaryStrategy& phi, const PricePath& prices, const DividendPath& dividends,
                             double alpha, std::size_t k);

/// Sup over grid points and sides of |A - B|.
double up_distance(const TaxFlow& a, const TaxFlow& b);

struct StabilityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double epsilon = 0.0;
  bool ok = true;
};

/// |int F - int F~| <= 3 eps (sup S - inf S) at grid time k.
StabilityCheck stability_bound_check(const ElementaryStrategy& phi, const ElementaryStrategy& phi_tilde,
                                     const PricePath& prices, std::size_t k);

/// phi[k] = sampler(t_k) for k >= 1; the sampler must be left-continuous.
ElementaryStrategy approximate_strategy(const std::function<double(double)>& sampler, const TimeGrid& grid,
                                        std::optional<double> terminal = std::nullopt);

/// 1 on a union of intervals (a, b]; used for the pointwise-convergence counterexample.
ElementaryStrategy indicator_strategy(const TimeGrid& grid, const std::vector<std::pair<double, double>>& intervals,
                                      double terminal = 0.0);

}  // namespace taxflow
