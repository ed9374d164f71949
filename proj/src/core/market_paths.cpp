#include "taxflow/market_paths.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "taxflow/error.hpp"
#include "taxflow/rng.hpp"

namespace taxflow {

namespace {

void require_same_length(const TimeGrid& grid, std::size_t n, const char* what) {
  if (grid.size() != n)
    fail(ErrorCode::InvalidArgument, std::string(what) + ": expected " + std::to_string(grid.size()) +
                                         " values, got " + std::to_string(n));
}

// Second stream id for jump arrivals, kept apart from the diffusion stream.
constexpr std::uint64_t kJumpStream = 0x4A554D50ULL;

}  // namespace

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.size() < 2) fail(ErrorCode::InvalidArgument, "time grid needs at least 2 points");
  if (times_.front() != 0.0) fail(ErrorCode::InvalidArgument, "time grid must start at 0");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1]))
      fail(ErrorCode::InvalidArgument, "time grid not strictly increasing at index " + std::to_string(k));
}

TimeGrid TimeGrid::uniform(std::size_t steps, double horizon) {
  require(steps > 0, "time grid: steps must be positive");
  require(horizon > 0.0, "time grid: horizon must be positive");
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
  t.back() = horizon;
  return TimeGrid(std::move(t));
}

TimeGrid TimeGrid::integer(std::size_t steps) { return uniform(steps, static_cast<double>(steps)); }

std::size_t TimeGrid::find(double t, double tol) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  if (it != times_.end() && std::abs(*it - t) <= tol) return static_cast<std::size_t>(it - times_.begin());
  return times_.size();
}

PricePath::PricePath(TimeGrid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  require_same_length(grid, values.size(), "price path");
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!(values[k] >= 0.0))
      fail(ErrorCode::InvalidArgument, "price path: negative or NaN price at index " + std::to_string(k));
}

double PricePath::at_time(double t) const {
  auto times = grid.times();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return values.front();
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double PricePath::running_min(std::size_t k) const {
  return *std::min_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k) + 1);
}

double PricePath::running_max(std::size_t k) const {
  return *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k) + 1);
}

DividendPath::DividendPath(TimeGrid g, std::vector<double> c) : grid(std::move(g)), cumulative(std::move(c)) {
  require_same_length(grid, cumulative.size(), "dividend path");
  if (!(cumulative.front() >= 0.0)) fail(ErrorCode::InvalidArgument, "dividend path: D_0 must be nonnegative");
  for (std::size_t k = 1; k < cumulative.size(); ++k)
    if (!(cumulative[k] >= cumulative[k - 1]))
      fail(ErrorCode::InvalidArgument, "dividend path: cumulative dividends decrease at index " + std::to_string(k));
}

DividendPath DividendPath::zero(const TimeGrid& g) { return DividendPath(g, std::vector<double>(g.size(), 0.0)); }

ReturnPath::ReturnPath(TimeGrid g, std::vector<double> inc) : grid(std::move(g)), increments(std::move(inc)) {
  require_same_length(grid, increments.size() + 1, "return path");
  for (std::size_t k = 0; k < increments.size(); ++k)
    if (!(increments[k] >= -1.0))
      fail(ErrorCode::InvalidArgument, "return path: increment below -1 at step " + std::to_string(k + 1));
}

RatePath::RatePath(TimeGrid g, std::vector<double> r) : grid(std::move(g)), rates(std::move(r)) {
  require_same_length(grid, rates.size() + 1, "rate path");
  for (std::size_t k = 0; k < rates.size(); ++k)
    if (!std::isfinite(rates[k])) fail(ErrorCode::InvalidArgument, "rate path: non-finite rate");
}

RatePath RatePath::constant(const TimeGrid& g, double rate) {
  return RatePath(g, std::vector<double>(g.steps(), rate));
}

double RatePath::accumulated(std::size_t k) const {
  double b = 0.0;
  for (std::size_t j = 0; j < k; ++j) b += rates[j] * grid.dt(j);
  return b;
}

PricePath gen_crr(double s0, double sigma, std::size_t steps, double horizon, std::uint64_t seed) {
  require(s0 > 0.0, "gen_crr: s0 must be positive");
  require(sigma >= 0.0, "gen_crr: sigma must be nonnegative");
  require(steps > 0, "gen_crr: steps must be positive");
  TimeGrid grid = TimeGrid::uniform(steps, horizon);
  const double tick = sigma * std::sqrt(horizon / static_cast<double>(steps));
  Rng rng(seed);
  std::vector<double> s(steps + 1, s0);
  // Prices live on the lattice s0 + m * tick so that revisited levels compare equal.
  long level = 0;
  bool absorbed = false;
  for (std::size_t k = 1; k <= steps; ++k) {
    if (!absorbed) {
      level += rng.coin() ? 1 : -1;
      const double price = s0 + static_cast<double>(level) * tick;
      if (price <= 0.0) absorbed = true;
      s[k] = absorbed ? 0.0 : price;
    } else {
      s[k] = 0.0;
    }
  }
  return PricePath(std::move(grid), std::move(s));
}

PricePath gen_gbm(double s0, double mu, double sigma, std::size_t steps, double horizon, std::uint64_t seed) {
  return gen_jump_diffusion(s0, mu, sigma, 0.0, JumpLaw{}, steps, horizon, seed).path;
}

JumpDiffusionPath gen_jump_diffusion(double s0, double mu, double sigma, double intensity, const JumpLaw& law,
                                     std::size_t steps, double horizon, std::uint64_t seed) {
  require(s0 >= 0.0, "gen_jump_diffusion: s0 must be nonnegative");
  require(sigma >= 0.0, "gen_jump_diffusion: sigma must be nonnegative");
  require(steps > 0, "gen_jump_diffusion: steps must be positive");
  require(intensity >= 0.0, "gen_jump_diffusion: intensity must be nonnegative");
  if (intensity > 0.0) {
    require(law.down >= 0.0 && law.down <= 1.0, "gen_jump_diffusion: downward jump must lie in [0, 100%]");
    require(law.up >= 0.0, "gen_jump_diffusion: upward jump must be nonnegative");
    require(law.p_up >= 0.0 && law.p_up <= 1.0, "gen_jump_diffusion: p_up must be a probability");
  }
  TimeGrid grid = TimeGrid::uniform(steps, horizon);
  Rng diffusion(seed);
  Rng arrivals(seed, kJumpStream);
  std::vector<double> s(steps + 1, s0);
  std::vector<std::size_t> jumps;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double dt = grid.dt(k - 1);
    const double z = diffusion.normal();
    double next = s[k - 1] * std::exp((mu - 0.5 * sigma * sigma) * dt + sigma * std::sqrt(dt) * z);
    if (intensity > 0.0) {
      const double p_jump = 1.0 - std::exp(-intensity * dt);
      if (arrivals.uniform() < p_jump) {
        const double rel = arrivals.uniform() < law.p_up ? law.up : -law.down;
        next *= 1.0 + rel;
        jumps.push_back(k);
      }
    }
    s[k] = std::max(next, 0.0);
  }
  return {PricePath(std::move(grid), std::move(s)), std::move(jumps)};
}

PricePath refine_grid(const PricePath& path, std::size_t factor) {
  require(factor >= 1, "refine_grid: factor must be at least 1");
  if (factor == 1) return path;
  const auto& g = path.grid;
  std::vector<double> t;
  std::vector<double> v;
  t.reserve(g.steps() * factor + 1);
  v.reserve(g.steps() * factor + 1);
  for (std::size_t k = 0; k < g.steps(); ++k) {
    for (std::size_t j = 0; j < factor; ++j) {
      t.push_back(j == 0 ? g[k] : g[k] + (g[k + 1] - g[k]) * static_cast<double>(j) / static_cast<double>(factor));
      v.push_back(path[k]);
    }
  }
  t.push_back(g.horizon());
  v.push_back(path.values.back());
  return PricePath(TimeGrid(std::move(t)), std::move(v));
}

ReturnPath returns_from_path(const PricePath& path) {
  std::vector<double> inc(path.size() - 1, 0.0);
  for (std::size_t k = 1; k < path.size(); ++k) {
    const double prev = path[k - 1];
    if (prev > 0.0) inc[k - 1] = (path[k] - prev) / prev;
  }
  return ReturnPath(path.grid, std::move(inc));
}

}  // namespace taxflow
