#include "taxflow/tax_flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "taxflow/error.hpp"

namespace taxflow {

namespace {

void require_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
  if (!(a == b)) fail(ErrorCode::InvalidArgument, std::string(what) + ": grids differ");
}

// Step function of book profits below a position level.
//
// Shares are labelled x in (0, top]; share x was bought at the last index
// j <= last_candidate with phi[j] <= top - x. Its profit is
// price - min(S[j..window_end]). Scanning j downwards visits the purchase
// dates in order of increasing residence time.
BookProfitFunction profile(const std::vector<double>& phi, const PricePath& prices, double top,
                           std::size_t last_candidate, std::size_t window_end) {
  std::vector<ProfitSegment> segs;
  if (!(top > 0.0)) return BookProfitFunction();
  const double price = prices[window_end];
  double level = top;
  double window_min = prices[window_end];
  for (std::size_t j = window_end + 1; j-- > 0;) {
    window_min = std::min(window_min, prices[j]);
    if (j > last_candidate) continue;
    if (phi[j] < level) {
      segs.push_back({level - phi[j], price - window_min});
      level = phi[j];
      if (!(level > 0.0)) break;
    }
  }
  return BookProfitFunction(std::move(segs));
}

}  // namespace

ElementaryStrategy::ElementaryStrategy(TimeGrid grid, std::vector<double> phi, std::optional<double> terminal)
    : grid_(std::move(grid)), phi_(std::move(phi)), terminal_(0.0) {
  if (phi_.size() != grid_.size())
    fail(ErrorCode::InvalidArgument, "strategy: expected " + std::to_string(grid_.size()) + " values, got " +
                                         std::to_string(phi_.size()));
  if (phi_[0] != 0.0) fail(ErrorCode::InvalidArgument, "strategy: position at time 0 must be 0");
  for (std::size_t k = 0; k < phi_.size(); ++k)
    if (!(phi_[k] >= 0.0)) fail(ErrorCode::InvalidArgument, "strategy: short position at index " + std::to_string(k));
  terminal_ = terminal.value_or(phi_.back());
  if (!(terminal_ >= 0.0)) fail(ErrorCode::InvalidArgument, "strategy: short terminal position");
}

ElementaryStrategy ElementaryStrategy::from_discrete(const DiscreteStrategy& d) {
  const std::size_t last = d.last_index();
  require(last >= 1, "strategy embedding needs at least two dates");
  std::vector<double> phi(last + 1, 0.0);
  for (std::size_t k = 1; k <= last; ++k) phi[k] = d.after(k - 1);
  return ElementaryStrategy(TimeGrid::integer(last), std::move(phi), d.after(last));
}

ElementaryStrategy ElementaryStrategy::from_after_trade(TimeGrid grid, const std::vector<double>& after) {
  require(after.size() == grid.size(), "strategy: positions and grid differ in length");
  std::vector<double> phi(after.size(), 0.0);
  for (std::size_t k = 1; k < after.size(); ++k) phi[k] = after[k - 1];
  return ElementaryStrategy(std::move(grid), std::move(phi), after.back());
}

DiscreteStrategy ElementaryStrategy::to_discrete() const {
  std::vector<double> after_trade(phi_.size());
  for (std::size_t k = 0; k < phi_.size(); ++k) after_trade[k] = after(k);
  return DiscreteStrategy(std::move(after_trade));
}

ElementaryStrategy ElementaryStrategy::scaled(double lambda) const {
  require(lambda >= 0.0, "strategy scaling factor must be nonnegative");
  std::vector<double> v = phi_;
  for (double& x : v) x *= lambda;
  return ElementaryStrategy(grid_, std::move(v), terminal_ * lambda);
}

ElementaryStrategy ElementaryStrategy::plus(const ElementaryStrategy& other) const {
  require_grid(grid_, other.grid_, "strategy sum");
  std::vector<double> v = phi_;
  for (std::size_t k = 0; k < v.size(); ++k) v[k] += other.phi_[k];
  return ElementaryStrategy(grid_, std::move(v), terminal_ + other.terminal_);
}

TaxFlow::TaxFlow(TimeGrid g)
    : grid(std::move(g)), left(grid.size(), 0.0), at(grid.size(), 0.0), right(grid.size(), 0.0) {}

double TaxFlow::value(std::size_t k, Side side) const {
  switch (side) {
    case Side::Left: return left[k];
    case Side::At: return at[k];
    case Side::Right: return right[k];
  }
  return at[k];
}

std::size_t purchase_time(const ElementaryStrategy& phi, std::size_t k, double x) {
  const double held = phi.held(k);
  if (x > held || x <= 0.0) return k;
  const double level = held - x;
  for (std::size_t j = k + 1; j-- > 0;)
    if (phi.held(j) <= level) return j;
  return 0;
}

double book_profit(const ElementaryStrategy& phi, const PricePath& prices, std::size_t k, double x) {
  require_grid(phi.grid(), prices.grid, "book_profit");
  if (x > phi.held(k)) return 0.0;
  const std::size_t tau = purchase_time(phi, k, x);
  double m = prices[k];
  for (std::size_t u = tau; u <= k; ++u) m = std::min(m, prices[u]);
  return prices[k] - m;
}

BookProfitFunction book_profit_function(const ElementaryStrategy& phi, const PricePath& prices, std::size_t k,
                                        Side side) {
  require_grid(phi.grid(), prices.grid, "book_profit_function");
  require(k < phi.size(), "book_profit_function: time index out of range");
  switch (side) {
    case Side::Left:
      if (k == 0) return BookProfitFunction();
      return profile(phi.values(), prices, phi.held(k), k - 1, k - 1);
    case Side::At:
      return profile(phi.values(), prices, phi.held(k), k, k);
    case Side::Right:
      // The right limit sees the regrouping at t_k: shares bought at t_k sit on top.
      return profile(phi.values(), prices, phi.after(k), k, k);
  }
  return BookProfitFunction();
}

double book_profit_integral(const ElementaryStrategy& phi, const PricePath& prices, std::size_t k, Side side) {
  return book_profit_function(phi, prices, k, side).integral();
}

BookProfitIndex::BookProfitIndex(const ElementaryStrategy& phi, const PricePath& prices)
    : phi_(&phi), prices_(&prices), prev_smaller_(phi.size(), kNone) {
  require_grid(phi.grid(), prices.grid, "BookProfitIndex");
  const auto& v = phi.values();
  std::vector<std::size_t> stack;
  for (std::size_t j = 0; j < v.size(); ++j) {
    while (!stack.empty() && v[stack.back()] >= v[j]) stack.pop_back();
    prev_smaller_[j] = stack.empty() ? kNone : stack.back();
    stack.push_back(j);
  }
  sparse_min_.push_back(prices.values);
  for (std::size_t width = 2; width <= prices.size(); width *= 2) {
    const auto& prev = sparse_min_.back();
    std::vector<double> next(prices.size() - width + 1);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::min(prev[i], prev[i + width / 2]);
    sparse_min_.push_back(std::move(next));
  }
}

double BookProfitIndex::range_min(std::size_t a, std::size_t b) const {
  const std::size_t len = b - a + 1;
  std::size_t level = 0;
  while ((std::size_t{2} << level) <= len) ++level;
  const auto& row = sparse_min_[level];
  return std::min(row[a], row[b + 1 - (std::size_t{1} << level)]);
}

std::size_t BookProfitIndex::first_record(std::size_t k, Side side) const {
  if (side != Side::Right) return prev_smaller_[k];
  const double top = phi_->after(k);
  if (top > phi_->held(k)) return k;
  std::size_t r = prev_smaller_[k];
  while (r != kNone && phi_->held(r) >= top) r = prev_smaller_[r];
  return r;
}

// Records after r are exactly the previous-smaller chain of r.
template <class Visit>
void BookProfitIndex::walk(double top, std::size_t first, std::size_t window_end, Visit&& visit) const {
  const double price = (*prices_)[window_end];
  double level = top;
  for (std::size_t r = first; r != kNone && level > 0.0; r = prev_smaller_[r]) {
    visit(level - phi_->held(r), price - range_min(r, window_end));
    level = phi_->held(r);
  }
}

BookProfitFunction BookProfitIndex::function(std::size_t k, Side side) const {
  std::vector<ProfitSegment> segs;
  const double top = side == Side::Right ? phi_->after(k) : phi_->held(k);
  if (side == Side::Left && k == 0) return BookProfitFunction();
  const std::size_t end = side == Side::Left ? k - 1 : k;
  walk(top, first_record(k, side), end, [&](double w, double p) { segs.push_back({w, p}); });
  return BookProfitFunction(std::move(segs));
}

double BookProfitIndex::integral(std::size_t k, Side side) const {
  const double top = side == Side::Right ? phi_->after(k) : phi_->held(k);
  if (side == Side::Left && k == 0) return 0.0;
  const std::size_t end = side == Side::Left ? k - 1 : k;
  double acc = 0.0;
  walk(top, first_record(k, side), end, [&](double w, double p) { acc += w * p; });
  return acc;
}

TaxFlow tax_process_elementary(const ElementaryStrategy& phi, const PricePath& prices, const DividendPath& dividends,
                               double alpha, TaxComponents* components) {
  require_grid(phi.grid(), prices.grid, "tax_process_elementary");
  require_grid(phi.grid(), dividends.grid, "tax_process_elementary");
  const std::size_t n = phi.size();
  TaxFlow flow(phi.grid());
  TaxComponents parts{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const BookProfitIndex index(phi, prices);

  BookProfitFunction after_prev = index.function(0, Side::Right);
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      flow.left[k] = flow.right[k - 1];
      // Over (t_{k-1}, t_k] the running low of S - S_{k-1} is min(0, dS).
      const double low = std::min(0.0, prices[k] - prices[k - 1]);
      parts.wash[k] = alpha * after_prev.integrate_negative_part(low);
      parts.dividend[k] = alpha * phi.held(k) * dividends.increment(k);
      flow.at[k] = flow.left[k] + parts.wash[k] + parts.dividend[k];
    }
    const double sold = std::max(0.0, -phi.right_jump(k));
    if (sold > 0.0) parts.sale[k] = alpha * index.function(k, Side::At).integrate(sold);
    flow.right[k] = flow.at[k] + parts.sale[k];
    if (k + 1 < n) after_prev = index.function(k, Side::Right);
  }
  if (components) *components = std::move(parts);
  return flow;
}

TaxFlow tax_process_via_identity(const ElementaryStrategy& phi, const PricePath& prices,
                                 const DividendPath& dividends, double alpha) {
  require_grid(phi.grid(), prices.grid, "tax_process_via_identity");
  require_grid(phi.grid(), dividends.grid, "tax_process_via_identity");
  const std::size_t n = phi.size();
  TaxFlow flow(phi.grid());
  const BookProfitIndex index(phi, prices);
  double gains = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      flow.left[k] = alpha * gains - alpha * index.integral(k, Side::Left);
      gains += phi.held(k) * (prices[k] - prices[k - 1] + dividends.increment(k));
    }
    flow.at[k] = alpha * gains - alpha * index.integral(k, Side::At);
    flow.right[k] = alpha * gains - alpha * index.integral(k, Side::Right);
  }
  return flow;
}

JumpParts jump_decomposition(const ElementaryStrategy& phi, const PricePath& prices, const DividendPath& dividends,
                             double alpha, std::size_t k) {
  require_grid(phi.grid(), prices.grid, "jump_decomposition");
  require(k < phi.size(), "jump_decomposition: time index out of range");
  JumpParts parts;
  if (k > 0) {
    const double ds = prices[k] - prices[k - 1];
    const BookProfitFunction before = book_profit_function(phi, prices, k, Side::Left);
    parts.wash_part = alpha * before.integrate_negative_part(ds);
    for (const auto& seg : before.segments())
      if (seg.profit + ds < 0.0) parts.wash_sold_shares += seg.width;
    parts.dividend_part = alpha * phi.held(k) * dividends.increment(k);
    parts.delta_minus = parts.wash_part + parts.dividend_part;
  }
  const double sold = std::max(0.0, -phi.right_jump(k));
  if (sold > 0.0) parts.delta_plus = alpha * book_profit_function(phi, prices, k, Side::At).integrate(sold);
  return parts;
}

double up_distance(const TaxFlow& a, const TaxFlow& b) {
  require_grid(a.grid, b.grid, "up_distance");
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d = std::max(d, std::abs(a.left[k] - b.left[k]));
    d = std::max(d, std::abs(a.at[k] - b.at[k]));
    d = std::max(d, std::abs(a.right[k] - b.right[k]));
  }
  return d;
}

StabilityCheck stability_bound_check(const ElementaryStrategy& phi, const ElementaryStrategy& phi_tilde,
                                     const PricePath& prices, std::size_t k) {
  require_grid(phi.grid(), phi_tilde.grid(), "stability_bound_check");
  require_grid(phi.grid(), prices.grid, "stability_bound_check");
  StabilityCheck check;
  for (std::size_t j = 0; j <= k; ++j)
    check.epsilon = std::max(check.epsilon, std::abs(phi.held(j) - phi_tilde.held(j)));
  check.lhs = std::abs(book_profit_integral(phi, prices, k) - book_profit_integral(phi_tilde, prices, k));
  check.rhs = 3.0 * check.epsilon * (prices.running_max(k) - prices.running_min(k));
  check.ok = check.lhs <= check.rhs + 1e-12;
  return check;
}

ElementaryStrategy approximate_strategy(const std::function<double(double)>& sampler, const TimeGrid& grid,
                                        std::optional<double> terminal) {
  std::vector<double> phi(grid.size(), 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    phi[k] = sampler(grid[k]);
    if (!(phi[k] >= 0.0))
      fail(ErrorCode::InvalidArgument, "approximate_strategy: negative sample at t = " + std::to_string(grid[k]));
  }
  return ElementaryStrategy(grid, std::move(phi), terminal);
}

ElementaryStrategy indicator_strategy(const TimeGrid& grid, const std::vector<std::pair<double, double>>& intervals,
                                      double terminal) {
  auto sampler = [&](double t) {
    for (const auto& [a, b] : intervals)
      if (t > a && t <= b) return 1.0;
    return 0.0;
  };
  return approximate_strategy(sampler, grid, terminal);
}

}  // namespace taxflow
