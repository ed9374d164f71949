#include "taxflow/wealth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "taxflow/error.hpp"
#include "taxflow/rng.hpp"

namespace taxflow {

namespace {

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
  if (!(a == b)) fail(ErrorCode::InvalidArgument, std::string(what) + ": grids differ");
}

bool below(double gap, double scale) { return gap < -1e-9 * std::max(1.0, std::abs(scale)); }

}  // namespace

WealthPath::WealthPath(TimeGrid g)
    : grid(g),
      x_left(g.size(), 0.0),
      x_at(g.size(), 0.0),
      x_right(g.size(), 0.0),
      v_left(g.size(), 0.0),
      v_at(g.size(), 0.0),
      v_right(g.size(), 0.0),
      interest(g.size(), 0.0),
      tax(g) {}

WealthPath self_financing_wealth(const ElementaryStrategy& phi, const PricePath& prices,
                                 const DividendPath& dividends, const RatePath& rates, double alpha, double v0) {
  require_same_grid(phi.grid(), prices.grid, "self_financing_wealth");
  require_same_grid(phi.grid(), rates.grid, "self_financing_wealth");
  const std::size_t n = phi.size();
  WealthPath w(phi.grid());
  w.alpha = alpha;
  w.v0 = v0;
  w.tax = tax_process_elementary(phi, prices, dividends, alpha);
  const TaxFlow& pi = w.tax;
  w.rates_nonnegative = std::all_of(rates.rates.begin(), rates.rates.end(), [](double r) { return r >= 0.0; });

  double accrued = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == 0) {
      w.x_left[0] = w.x_at[0] = v0;
    } else {
      const double credit = (1.0 - alpha) * rates.rates[k - 1] * phi.grid().dt(k - 1) * w.x_right[k - 1];
      accrued += credit;
      w.x_left[k] = w.x_right[k - 1] + credit;
      w.x_at[k] = w.x_left[k] - (pi.at[k] - pi.left[k]) + phi.held(k) * dividends.increment(k);
    }
    w.interest[k] = accrued;
    w.x_right[k] = w.x_at[k] - prices[k] * phi.right_jump(k) - (pi.right[k] - pi.at[k]);
    w.v_left[k] = w.x_left[k] + (k == 0 ? 0.0 : phi.held(k) * prices[k - 1]);
    w.v_at[k] = w.x_at[k] + phi.held(k) * prices[k];
    w.v_right[k] = w.x_right[k] + phi.after(k) * prices[k];
  }

  // Both closed self-financing forms, summed independently of the recursion.
  double purchases = 0.0;  // sum_{j<k} S_j (phi_{j+} - phi_j)
  double divs = 0.0;       // phi . D
  double gains = 0.0;      // phi . S
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      divs += phi.held(k) * dividends.increment(k);
      gains += phi.held(k) * (prices[k] - prices[k - 1]);
    }
    const double cash_form = v0 - purchases + w.interest[k] - pi.at[k] + divs;
    const double gains_form = v0 + w.interest[k] + gains + divs - pi.at[k] - phi.held(k) * prices[k];
    purchases += prices[k] * phi.right_jump(k);
    const double cash_form_right = v0 - purchases + w.interest[k] - pi.right[k] + divs;
    w.residual = std::max({w.residual, std::abs(cash_form - w.x_at[k]), std::abs(gains_form - w.x_at[k]),
                           std::abs(cash_form_right - w.x_right[k])});
  }
  return w;
}

PricePath solve_dividend_sde(const DividendModel& model) {
  const auto& r = model.returns;
  const auto& d = model.dividends;
  require_same_grid(r.grid, d.grid, "solve_dividend_sde");
  require(model.s0 >= 0.0, "solve_dividend_sde: s0 must be nonnegative");
  const std::size_t n = r.grid.size();
  std::vector<double> s(n, 0.0);
  s[0] = model.s0 - d.cumulative[0];
  if (s[0] < 0.0) {
    if (s[0] < -1e-12 * std::max(1.0, model.s0))
      fail(ErrorCode::Validation, "inadmissible dividend: price would turn negative at index 0");
    s[0] = 0.0;
  }
  for (std::size_t k = 1; k < n; ++k) {
    if (s[k - 1] == 0.0) continue;  // absorbed
    const double v = s[k - 1] * (1.0 + r.increment(k)) - d.increment(k);
    if (v < 0.0) {
      if (v < -1e-12 * std::max(1.0, s[k - 1]))
        fail(ErrorCode::Validation, fmt::format("inadmissible dividend: price would turn negative at index {} ({:.17g})", k, v));
      s[k] = 0.0;
    } else {
      s[k] = v;
    }
  }
  return PricePath(r.grid, std::move(s));
}

PricePath solve_without_dividends(const DividendModel& model) {
  return solve_dividend_sde(DividendModel{model.returns, DividendPath::zero(model.returns.grid), model.s0});
}

RatioCheck ratio_monotone_check(const PricePath& with_dividends, const PricePath& without_dividends) {
  require_same_grid(with_dividends.grid, without_dividends.grid, "ratio_monotone_check");
  const auto& sd = with_dividends;
  const auto& s0 = without_dividends;
  const std::size_t n = sd.size();
  RatioCheck check;
  std::vector<double> ratio(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) ratio[k] = s0[k] > 0.0 ? sd[k] / s0[k] : 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double inc = ratio[k] - ratio[k - 1];
    check.max_increase = std::max(check.max_increase, inc);
    if (inc > 1e-12) check.monotone = false;
  }

  // Product form: the ratio evolves by -dD / S_0(t-) + dD dR / (S_0(t-) (1 + dR)).
  if (s0[0] > 0.0) {
    const double scale = std::max(ratio[0], 1e-300);
    double y = ratio[0];
    for (std::size_t k = 1; k < n && s0[k] > 0.0; ++k) {
      const double dr = s0[k] / s0[k - 1] - 1.0;
      const double dd = sd[k - 1] * (1.0 + dr) - sd[k];
      y += -dd / s0[k - 1] + dd * dr / (s0[k - 1] * (1.0 + dr));
      const double err = std::abs(y - ratio[k]) / scale;
      check.max_product_error = std::max(check.max_product_error, err);
    }
    if (check.max_product_error > 1e-9) check.product_form_ok = false;
  }
  return check;
}

ElementaryStrategy map_strategy_no_dividends(const ElementaryStrategy& phi_d, const PricePath& with_dividends,
                                             const PricePath& without_dividends) {
  require_same_grid(phi_d.grid(), with_dividends.grid, "map_strategy_no_dividends");
  require_same_grid(phi_d.grid(), without_dividends.grid, "map_strategy_no_dividends");
  const auto& sd = with_dividends;
  const auto& s0 = without_dividends;
  const std::size_t n = phi_d.size();
  std::vector<double> phi(n, 0.0);
  for (std::size_t k = 1; k < n; ++k)
    phi[k] = s0[k - 1] > 0.0 ? phi_d.held(k) * (sd[k - 1] / s0[k - 1]) : 0.0;
  const double terminal = s0[n - 1] > 0.0 ? phi_d.terminal() * (sd[n - 1] / s0[n - 1]) : 0.0;
  return ElementaryStrategy(phi_d.grid(), std::move(phi), terminal);
}

bool book_profit_dominance(const ElementaryStrategy& phi_d, const PricePath& with_dividends,
                           const ElementaryStrategy& phi_0, const PricePath& without_dividends, std::size_t k,
                           double tol) {
  const double hd = phi_d.held(k);
  const double h0 = phi_0.held(k);
  if (!(hd > 0.0) || !(h0 > 0.0)) return true;
  const double c = h0 / hd;
  const BookProfitFunction fd = book_profit_function(phi_d, with_dividends, k);
  const BookProfitFunction f0 = book_profit_function(phi_0, without_dividends, k);
  // c * phi_D = phi_0 up to rounding; keep the scaled label inside F_0's support.
  const double top = f0.total_width();
  double left = 0.0;
  for (const auto& seg : fd.segments()) {
    const double bound_mid = c * f0.evaluate(std::min(c * (left + 0.5 * seg.width), top));
    const double bound_end = c * f0.evaluate(std::min(c * (left + seg.width), top));
    const double slack = tol * std::max(1.0, std::abs(seg.profit));
    if (seg.profit > bound_mid + slack || seg.profit > bound_end + slack) return false;
    left += seg.width;
  }
  return true;
}

DividendModel random_dividend_model(std::uint64_t seed, std::size_t steps, double s0, double step_return,
                                    double dividend_prob, double max_yield) {
  require(steps >= 1, "random_dividend_model: need at least one step");
  require(step_return >= 0.0 && step_return < 1.0, "random_dividend_model: step return must lie in [0, 1)");
  require(max_yield >= 0.0 && max_yield <= 1.0, "random_dividend_model: yield must lie in [0, 1]");
  Rng rng(seed, 11);
  const TimeGrid g = TimeGrid::uniform(steps, 1.0);
  std::vector<double> inc(steps), cum(steps + 1, 0.0);
  double s = s0;
  for (std::size_t k = 1; k <= steps; ++k) {
    inc[k - 1] = rng.coin() ? step_return : -step_return;
    const double cum_price = s * (1.0 + inc[k - 1]);
    double paid = 0.0;
    if (rng.uniform() < dividend_prob) paid = max_yield * rng.uniform() * cum_price;
    cum[k] = cum[k - 1] + paid;
    s = cum_price - paid;
  }
  return DividendModel{ReturnPath(g, std::move(inc)), DividendPath(g, std::move(cum)), s0};
}

DividendComparison compare_dividend_policies(const ElementaryStrategy& phi_d, const DividendModel& model,
                                             const RatePath& rates, double alpha, double v0) {
  PricePath sd = solve_dividend_sde(model);
  PricePath s0 = solve_without_dividends(model);
  require_same_grid(phi_d.grid(), sd.grid, "compare_dividend_policies");
  ElementaryStrategy phi0 = map_strategy_no_dividends(phi_d, sd, s0);
  WealthPath wd = self_financing_wealth(phi_d, sd, model.dividends, rates, alpha, v0);
  WealthPath w0 = self_financing_wealth(phi0, s0, DividendPath::zero(sd.grid), rates, alpha, v0);

  DividendComparison c{std::move(sd), std::move(s0), std::move(phi0), std::move(wd), std::move(w0), {}, 0.0, 0.0,
                       0.0, 0, 0, true};
  c.rates_nonnegative = c.wealth_d.rates_nonnegative;
  const std::size_t n = phi_d.size();
  bool first = true;
  for (std::size_t k = 0; k < n; ++k) {
    const double vd[] = {c.wealth_d.v_left[k], c.wealth_d.v_at[k], c.wealth_d.v_right[k]};
    const double v0s[] = {c.wealth_0.v_left[k], c.wealth_0.v_at[k], c.wealth_0.v_right[k]};
    const double pd[] = {c.wealth_d.tax.left[k], c.wealth_d.tax.at[k], c.wealth_d.tax.right[k]};
    const double p0[] = {c.wealth_0.tax.left[k], c.wealth_0.tax.at[k], c.wealth_0.tax.right[k]};
    for (int side = 0; side < 3; ++side) {
      const double wg = v0s[side] - vd[side];
      const double tg = pd[side] - p0[side];
      if (first) {
        c.min_wealth_gap = c.max_wealth_gap = wg;
        c.min_tax_gap = tg;
        first = false;
      }
      c.min_wealth_gap = std::min(c.min_wealth_gap, wg);
      c.max_wealth_gap = std::max(c.max_wealth_gap, wg);
      c.min_tax_gap = std::min(c.min_tax_gap, tg);
      if (below(wg, v0s[side])) ++c.violations;
      if (below(tg, pd[side])) ++c.violations;
    }
    if (!book_profit_dominance(phi_d, c.with_dividends, c.phi_0, c.without_dividends, k)) ++c.dominance_failures;
    c.rows.push_back({phi_d.grid()[k], c.with_dividends[k], c.without_dividends[k], phi_d.held(k), c.phi_0.held(k),
                      c.wealth_d.tax.at[k], c.wealth_0.tax.at[k], c.wealth_d.v_at[k], c.wealth_0.v_at[k],
                      c.wealth_0.v_at[k] - c.wealth_d.v_at[k]});
  }
  return c;
}

std::string comparison_csv(const DividendComparison& c) {
  std::string out = "t,S_D,S_0,phi_D,phi_0,Pi_D,Pi_0,V_D,V_0,gap\n";
  for (const auto& r : c.rows)
    out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.t,
                       r.s_d, r.s_0, r.phi_d, r.phi_0, r.pi_d, r.pi_0, r.v_d, r.v_0, r.gap);
  return out;
}

std::string comparison_summary_json(const DividendComparison& c) {
  nlohmann::ordered_json j;
  j["min_gap"] = c.min_wealth_gap;
  j["max_gap"] = c.max_wealth_gap;
  j["min_tax_gap"] = c.min_tax_gap;
  j["violation_count"] = c.violations;
  j["dominance_failures"] = c.dominance_failures;
  j["rates_nonnegative"] = c.rates_nonnegative;
  return j.dump(2) + "\n";
}

DeferralExperiment deferral_experiment(double alpha, double rate, double horizon, std::size_t steps) {
  require(alpha > 0.0 && alpha < 1.0, "deferral_experiment: alpha must lie in (0, 1)");
  require(steps >= 1, "deferral_experiment: need at least one step");
  DeferralExperiment e;
  e.deferred_closed = 1.0 + (1.0 - alpha) * (std::exp(rate * horizon) - 1.0);
  e.immediate_closed = std::exp((1.0 - alpha) * rate * horizon);

  const TimeGrid g = TimeGrid::uniform(steps, horizon);
  const RatePath flat = RatePath::constant(g, 0.0);

  // Price grows at the rate; one share held to the horizon and then sold.
  std::vector<double> growth(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) growth[k] = std::exp(rate * g[k]);
  std::vector<double> hold(g.size(), 1.0);
  hold[0] = 0.0;
  const ElementaryStrategy buy_hold(g, hold, 0.0);
  const auto deferred = self_financing_wealth(buy_hold, PricePath(g, growth), DividendPath::zero(g), flat, alpha, 1.0);
  e.deferred_simulated = deferred.v_right.back();

  // Constant price; the same return is paid out as dividends and reinvested after tax.
  std::vector<double> cum(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) cum[k] = rate * g[k];
  std::vector<double> after(g.size());
  after[0] = 1.0;
  for (std::size_t k = 1; k < g.size(); ++k) after[k] = after[k - 1] * (1.0 + (1.0 - alpha) * (cum[k] - cum[k - 1]));
  const auto reinvest = ElementaryStrategy::from_after_trade(g, after);
  const auto immediate = self_financing_wealth(reinvest, PricePath(g, std::vector<double>(g.size(), 1.0)),
                                               DividendPath(g, cum), flat, alpha, 1.0);
  e.immediate_simulated = immediate.v_right.back();
  return e;
}

}  // namespace taxflow
