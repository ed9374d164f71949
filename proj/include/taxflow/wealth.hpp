#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "taxflow/market_paths.hpp"
#include "taxflow/tax_flow.hpp"

namespace taxflow {

/// Bank account X and total wealth V = X + phi * S, each with left, at and
/// right values per grid point.
struct WealthPath {
  TimeGrid grid;
  std::vector<double> x_left, x_at, x_right;
  std::vector<double> v_left, v_at, v_right;
  std::vector<double> interest;  // accumulated after-tax interest up to t_k
  double alpha = 0.0;
  double v0 = 0.0;
  /// Max deviation between the recursion and the two closed self-financing forms.
  double residual = 0.0;
  /// False when some rate is negative; dividend comparisons are then not covered.
  bool rates_nonnegative = true;
  TaxFlow tax;

  explicit WealthPath(TimeGrid g);
  std::size_t size() const noexcept { return x_at.size(); }
};

/// Bank account recursion. Interest (1 - alpha) X r dt is credited at the end
/// of each interval on the post-trade balance; dividends arrive gross and
/// their tax is part of Pi.
WealthPath self_financing_wealth(const ElementaryStrategy& phi, const PricePath& prices,
                                 const DividendPath& dividends, const RatePath& rates, double alpha, double v0);

/// Returns R, cumulative dividends D and the initial value s0.
struct DividendModel {
  ReturnPath returns;
  DividendPath dividends;
  double s0 = 0.0;
};

/// S_k = S_{k-1} (1 + dR_k) - dD_k with S_0 = s0 - D_0, absorbed at 0.
PricePath solve_dividend_sde(const DividendModel& model);

/// The same returns without dividends.
PricePath solve_without_dividends(const DividendModel& model);

struct RatioCheck {
  bool monotone = true;
  bool product_form_ok = true;
  double max_increase = 0.0;
  double max_product_error = 0.0;
  bool ok() const noexcept { return monotone && product_form_ok; }
  explicit operator bool() const noexcept { return ok(); }
};

/// S_D / S_0 (0 where S_0 = 0) is nonincreasing; also recomputes the ratio
/// as a product of per-step factors from the implied returns and dividends.
RatioCheck ratio_monotone_check(const PricePath& with_dividends, const PricePath& without_dividends);

/// phi_0 = phi_D * S_D(t-) / S_0(t-), zero once S_0(t-) = 0.
ElementaryStrategy map_strategy_no_dividends(const ElementaryStrategy& phi_d, const PricePath& with_dividends,
                                             const PricePath& without_dividends);

/// F_D(t, x) <= c F_0(t, c x) with c = phi_0(t) / phi_D(t), checked per segment of F_D.
bool book_profit_dominance(const ElementaryStrategy& phi_d, const PricePath& with_dividends,
                           const ElementaryStrategy& phi_0, const PricePath& without_dividends, std::size_t k,
                           double tol = 1e-9);

struct ComparisonRow {
  double t, s_d, s_0, phi_d, phi_0, pi_d, pi_0, v_d, v_0, gap;
};

struct DividendComparison {
  PricePath with_dividends;
  PricePath without_dividends;
  ElementaryStrategy phi_0;
  WealthPath wealth_d;
  WealthPath wealth_0;
  std::vector<ComparisonRow> rows;  // one per grid point, at-values
  double min_wealth_gap = 0.0;      // min over points and sides of V_0 - V_D
  double max_wealth_gap = 0.0;
  double min_tax_gap = 0.0;         // min over points and sides of Pi_D - Pi_0
  std::size_t dominance_failures = 0;
  std::size_t violations = 0;       // wealth and tax gaps below -1e-9
  bool rates_nonnegative = true;
};

/// Random admissible model: +-step returns and occasional proportional dividends.
DividendModel random_dividend_model(std::uint64_t seed, std::size_t steps, double s0, double step_return = 0.05,
                                    double dividend_prob = 0.2, double max_yield = 0.3);

DividendComparison compare_dividend_policies(const ElementaryStrategy& phi_d, const DividendModel& model,
                                             const RatePath& rates, double alpha, double v0);

std::string comparison_csv(const DividendComparison& c);
std::string comparison_summary_json(const DividendComparison& c);

/// Deferral versus immediate taxation of a continuously growing asset.
struct DeferralExperiment {
  double deferred_closed = 0.0;   // 1 + (1 - alpha)(e^{rT} - 1)
  double immediate_closed = 0.0;  // e^{(1 - alpha) r T}
  double deferred_simulated = 0.0;
  double immediate_simulated = 0.0;
};

/// Runs both policies through self_financing_wealth on a uniform grid.
DeferralExperiment deferral_experiment(double alpha, double rate, double horizon, std::size_t steps);

}  // namespace taxflow
