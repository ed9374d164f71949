#include "taxflow/efficient_strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <fmt/format.h>

#include "taxflow/error.hpp"
#include "taxflow/parallel.hpp"
#include "taxflow/rng.hpp"

namespace taxflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Index i with xs[i] <= s < xs[i + 1]; callers guarantee xs[0] <= s < xs.back().
std::size_t segment_of(const std::vector<double>& xs, double s) {
  auto it = std::upper_bound(xs.begin(), xs.end(), s);
  return static_cast<std::size_t>(it - xs.begin()) - 1;
}

}  // namespace

FeedbackRule FeedbackRule::linear(double slope, double intercept) {
  if (!(slope >= 0.0)) fail(ErrorCode::Validation, "linear rule: slope must be nonnegative (decreasing rules are not supported)");
  if (!(intercept >= 0.0)) fail(ErrorCode::Validation, "linear rule: intercept must be nonnegative");
  return FeedbackRule(Kind::Linear, slope, intercept);
}

FeedbackRule FeedbackRule::power(double scale, double exponent) {
  if (!(scale >= 0.0)) fail(ErrorCode::Validation, "power rule: scale must be nonnegative");
  if (!(exponent > 0.0)) fail(ErrorCode::Validation, "power rule: exponent must be positive");
  return FeedbackRule(Kind::Power, scale, exponent);
}

FeedbackRule FeedbackRule::tabulated(std::vector<double> prices, std::vector<double> shares) {
  if (prices.size() != shares.size() || prices.size() < 2)
    fail(ErrorCode::Validation, "tabulated rule: need at least two (price, shares) pairs of equal length");
  if (!(prices[0] >= 0.0)) fail(ErrorCode::Validation, "tabulated rule: prices must be nonnegative");
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (!(shares[i] >= 0.0)) fail(ErrorCode::Validation, fmt::format("tabulated rule: negative shares at node {}", i));
    if (i > 0 && !(prices[i] > prices[i - 1]))
      fail(ErrorCode::Validation, fmt::format("tabulated rule: prices must increase strictly (node {})", i));
    if (i > 0 && shares[i] < shares[i - 1])
      fail(ErrorCode::Validation, fmt::format("tabulated rule: shares decrease at node {}; rule must be nondecreasing", i));
  }
  FeedbackRule rule(Kind::Tabulated, 0.0, 0.0);
  rule.cum_.assign(prices.size(), 0.0);
  rule.cum_[0] = shares[0] * prices[0];
  for (std::size_t i = 1; i < prices.size(); ++i)
    rule.cum_[i] = rule.cum_[i - 1] + 0.5 * (shares[i - 1] + shares[i]) * (prices[i] - prices[i - 1]);
  rule.xs_ = std::move(prices);
  rule.ys_ = std::move(shares);
  return rule;
}

std::string FeedbackRule::describe() const {
  switch (kind_) {
    case Kind::Linear: return fmt::format("linear(slope={:.17g}, intercept={:.17g})", a_, b_);
    case Kind::Power: return fmt::format("power(scale={:.17g}, exponent={:.17g})", a_, b_);
    case Kind::Tabulated: return fmt::format("tabulated({} nodes)", xs_.size());
  }
  return "unknown";
}

double FeedbackRule::operator()(double s) const {
  switch (kind_) {
    case Kind::Linear: return a_ * s + b_;
    case Kind::Power: return a_ * std::pow(std::max(s, 0.0), b_);
    case Kind::Tabulated: {
      if (s <= xs_.front()) return ys_.front();
      if (s >= xs_.back()) return ys_.back();
      const std::size_t i = segment_of(xs_, s);
      const double w = (s - xs_[i]) / (xs_[i + 1] - xs_[i]);
      return ys_[i] + w * (ys_[i + 1] - ys_[i]);
    }
  }
  return 0.0;
}

double FeedbackRule::antiderivative(double s) const {
  switch (kind_) {
    case Kind::Linear: return 0.5 * a_ * s * s + b_ * s;
    case Kind::Power: return a_ * std::pow(std::max(s, 0.0), b_ + 1.0) / (b_ + 1.0);
    case Kind::Tabulated: {
      if (s <= xs_.front()) return ys_.front() * s;
      if (s >= xs_.back()) return cum_.back() + ys_.back() * (s - xs_.back());
      const std::size_t i = segment_of(xs_, s);
      return cum_[i] + 0.5 * (ys_[i] + (*this)(s)) * (s - xs_[i]);
    }
  }
  return 0.0;
}

double FeedbackRule::inverse(double y) const {
  switch (kind_) {
    case Kind::Linear:
      if (y < b_) return 0.0;
      return a_ > 0.0 ? (y - b_) / a_ : kInf;
    case Kind::Power:
      if (y < 0.0) return 0.0;
      return a_ > 0.0 ? std::pow(y / a_, 1.0 / b_) : kInf;
    case Kind::Tabulated: {
      if (y < ys_.front()) return 0.0;
      if (y >= ys_.back()) return kInf;
      // Last node at or below y; every later node lies above y.
      const auto it = std::upper_bound(ys_.begin(), ys_.end(), y);
      const std::size_t i = static_cast<std::size_t>(it - ys_.begin()) - 1;
      return xs_[i] + (y - ys_[i]) / (ys_[i + 1] - ys_[i]) * (xs_[i + 1] - xs_[i]);
    }
  }
  return 0.0;
}

double FeedbackRule::derivative(double s) const {
  switch (kind_) {
    case Kind::Linear: return a_;
    case Kind::Power: return s > 0.0 ? a_ * b_ * std::pow(s, b_ - 1.0) : (b_ >= 1.0 ? (b_ == 1.0 ? a_ : 0.0) : kInf);
    case Kind::Tabulated: {
      if (s < xs_.front() || s >= xs_.back()) return 0.0;
      const std::size_t i = segment_of(xs_, s);
      return (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
    }
  }
  return 0.0;
}

ElementaryStrategy feedback_strategy(const FeedbackRule& rule, const PricePath& prices) {
  std::vector<double> after(prices.size());
  for (std::size_t k = 0; k < prices.size(); ++k) after[k] = rule(prices[k]);
  return ElementaryStrategy::from_after_trade(prices.grid, after);
}

bool monotone_response(const ElementaryStrategy& phi, const PricePath& prices) {
  std::vector<std::pair<double, double>> pts(prices.size());
  for (std::size_t k = 0; k < prices.size(); ++k) pts[k] = {prices[k], phi.after(k)};
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].first == pts[i - 1].first && pts[i].second != pts[i - 1].second) return false;
    if (pts[i].second < pts[i - 1].second) return false;
  }
  return true;
}

double closed_form_book_profit(const FeedbackRule& rule, const PricePath& prices, std::size_t k, double x) {
  require(x >= 0.0, "closed_form_book_profit: x must be nonnegative");
  require(k < prices.size(), "closed_form_book_profit: time index out of range");
  const double s = prices[k];
  const double low = prices.running_min(k);
  const double held = rule(s);
  if (x == 0.0 || x > held) return 0.0;
  if (x <= held - rule(low)) return s - rule.inverse(held - x);
  return s - low;
}

ClosedFormTax closed_form_tax(const FeedbackRule& rule, const PricePath& prices, double alpha, bool liquidate) {
  const std::size_t n = prices.size();
  ClosedFormTax out{TaxFlow(prices.grid), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const double g_start = rule.antiderivative(prices[0]);
  double low = prices[0];
  double cov = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      cov += (rule(prices[k]) - rule(prices[k - 1])) * (prices[k] - prices[k - 1]);
      low = std::min(low, prices[k]);
    }
    out.minimum_part[k] = alpha * (rule.antiderivative(low) - g_start);
    out.covariation[k] = cov;
    const double pi = out.minimum_part[k] - 0.5 * alpha * cov;
    out.flow.left[k] = out.flow.at[k] = out.flow.right[k] = pi;
  }
  if (liquidate) out.flow.right[n - 1] += alpha * (rule.antiderivative(prices[n - 1]) - rule.antiderivative(low));
  return out;
}

std::vector<double> quadratic_covariation(const ElementaryStrategy& phi, const PricePath& prices) {
  if (!(phi.grid() == prices.grid)) fail(ErrorCode::InvalidArgument, "quadratic_covariation: grids differ");
  std::vector<double> out(prices.size(), 0.0);
  for (std::size_t k = 1; k < prices.size(); ++k)
    out[k] = out[k - 1] + phi.right_jump(k) * (prices[k] - prices[k - 1]);
  return out;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ConvergenceStudy convergence_study(const FeedbackRule& rule, const CrrSetup& setup, const std::vector<std::size_t>& steps) {
  require(setup.paths >= 1, "convergence_study: need at least one path");
  require(!steps.empty(), "convergence_study: need at least one step count");
  const std::size_t levels = steps.size();
  std::vector<std::vector<double>> engine(levels, std::vector<double>(setup.paths));
  std::vector<std::vector<double>> closed(levels, std::vector<double>(setup.paths));
  std::vector<char> nonpositive(levels * setup.paths, 1);

  parallel_for(levels * setup.paths, setup.threads, [&](std::size_t job) {
    const std::size_t l = job / setup.paths;
    const std::size_t i = job % setup.paths;
    const PricePath s =
        gen_crr(setup.s0, setup.sigma, steps[l], setup.horizon, derive_seed(derive_seed(setup.seed, steps[l]), i));
    const auto phi = feedback_strategy(rule, s);
    const auto flow = tax_process_elementary(phi, s, DividendPath::zero(s.grid), setup.alpha);
    const auto cf = closed_form_tax(rule, s, setup.alpha);
    engine[l][i] = flow.right.back();
    closed[l][i] = cf.flow.at.back();
    for (double v : cf.flow.at)
      if (v > 0.0) nonpositive[job] = 0;
  });

  ConvergenceStudy study;
  study.scale = setup.alpha * setup.sigma * setup.sigma * setup.horizon * rule.derivative(setup.s0) / 2.0;
  study.closed_form_nonpositive = std::all_of(nonpositive.begin(), nonpositive.end(), [](char c) { return c != 0; });
  for (std::size_t l = 0; l < levels; ++l) {
    std::vector<double> err(setup.paths);
    for (std::size_t i = 0; i < setup.paths; ++i) err[i] = std::abs(engine[l][i] - closed[l][i]);
    study.rows.push_back({steps[l], setup.horizon / static_cast<double>(steps[l]), quantile(engine[l], 0.5),
                          quantile(closed[l], 0.5), quantile(err, 0.5)});
    study.errors.push_back(std::move(err));
  }
  return study;
}

std::vector<RefinementRow> refinement_study(const FeedbackRule& rule, const CrrSetup& setup, std::size_t fine_steps,
                                            const std::vector<std::size_t>& coarse_steps) {
  require(coarse_steps.size() >= 2, "refinement_study: need at least two levels");
  for (std::size_t n : coarse_steps)
    require(n >= 1 && fine_steps % n == 0, "refinement_study: coarse step counts must divide the fine step count");
  const std::size_t levels = coarse_steps.size();
  std::vector<std::vector<double>> dist(levels - 1, std::vector<double>(setup.paths));

  parallel_for(setup.paths, setup.threads, [&](std::size_t i) {
    const PricePath s = gen_crr(setup.s0, setup.sigma, fine_steps, setup.horizon, derive_seed(setup.seed, i));
    const auto zero = DividendPath::zero(s.grid);
    std::vector<TaxFlow> flows;
    for (std::size_t l = 0; l < levels; ++l) {
      const std::size_t stride = fine_steps / coarse_steps[l];
      std::vector<double> phi(s.size(), 0.0);
      for (std::size_t k = 1; k < s.size(); ++k) phi[k] = rule(s[((k - 1) / stride) * stride]);
      const ElementaryStrategy strat(s.grid, std::move(phi), rule(s.values.back()));
      flows.push_back(tax_process_elementary(strat, s, zero, setup.alpha));
    }
    for (std::size_t l = 0; l + 1 < levels; ++l) dist[l][i] = up_distance(flows[l], flows[l + 1]);
  });

  std::vector<RefinementRow> rows;
  for (std::size_t l = 0; l + 1 < levels; ++l)
    rows.push_back({coarse_steps[l + 1], setup.horizon / static_cast<double>(coarse_steps[l + 1]),
                    quantile(dist[l], 0.5), quantile(dist[l], 0.95)});
  return rows;
}

std::string convergence_csv(const ConvergenceStudy& study) {
  std::string out = "n,mesh,engine_Pi_T,closed_form_Pi_T,abs_error\n";
  for (const auto& r : study.rows)
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.n, r.mesh, r.engine_pi_T, r.closed_form_pi_T,
                       r.abs_error);
  return out;
}

std::string refinement_csv(const std::vector<RefinementRow>& rows) {
  std::string out = "n,mesh,sup_distance_q50,sup_distance_q95\n";
  for (const auto& r : rows) out += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", r.n, r.mesh, r.q50, r.q95);
  return out;
}

}  // namespace taxflow
