#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace taxflow {

/// Strictly increasing time points 0 = t_0 < t_1 < ... < t_n = T.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> times);

  static TimeGrid uniform(std::size_t steps, double horizon);
  /// Integer grid 0, 1, ..., steps (the discrete-time embedding).
  static TimeGrid integer(std::size_t steps);

  std::size_t size() const noexcept { return times_.size(); }
  std::size_t steps() const noexcept { return times_.size() - 1; }
  double operator[](std::size_t k) const { return times_[k]; }
  double horizon() const noexcept { return times_.back(); }
  double dt(std::size_t k) const { return times_[k + 1] - times_[k]; }
  std::span<const double> times() const noexcept { return times_; }

  /// Index of the grid point at time t, or size() if t is not a grid point.
  std::size_t find(double t, double tol = 1e-12) const;

  bool operator==(const TimeGrid&) const = default;

 private:
  std::vector<double> times_;
};

/// Cadlag step path: values[k] holds on [t_k, t_{k+1}).
struct PricePath {
  TimeGrid grid;
  std::vector<double> values;

  PricePath(TimeGrid g, std::vector<double> v);

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t k) const { return values[k]; }
  /// Step-function value at an arbitrary time in [0, T].
  double at_time(double t) const;
  double running_min(std::size_t k) const;
  double running_max(std::size_t k) const;
};

/// Cumulative dividends per share D_t; nondecreasing.
struct DividendPath {
  TimeGrid grid;
  std::vector<double> cumulative;

  DividendPath(TimeGrid g, std::vector<double> c);
  static DividendPath zero(const TimeGrid& g);

  double increment(std::size_t k) const { return k == 0 ? 0.0 : cumulative[k] - cumulative[k - 1]; }
};

/// Return increments; increments[k - 1] is the return over (t_{k-1}, t_k].
struct ReturnPath {
  TimeGrid grid;
  std::vector<double> increments;

  ReturnPath(TimeGrid g, std::vector<double> inc);

  /// Increment at grid point k >= 1.
  double increment(std::size_t k) const { return increments[k - 1]; }
};

/// Short rate, constant on each interval; rates[k] applies on [t_k, t_{k+1}).
struct RatePath {
  TimeGrid grid;
  std::vector<double> rates;

  RatePath(TimeGrid g, std::vector<double> r);
  static RatePath constant(const TimeGrid& g, double rate);

  /// B_{t_k} = sum_{j<k} r_j dt_j.
  double accumulated(std::size_t k) const;
};

// Generators. Every generator is a pure function of its arguments.

/// Symmetric binomial walk with steps +-sigma*sqrt(dt), absorbed at 0.
PricePath gen_crr(double s0, double sigma, std::size_t steps, double horizon, std::uint64_t seed);

/// Exact log-normal stepping.
PricePath gen_gbm(double s0, double mu, double sigma, std::size_t steps, double horizon, std::uint64_t seed);

/// Two-point law for relative jump sizes: +up with probability p_up, otherwise -down.
struct JumpLaw {
  double up = 0.0;
  double down = 0.0;
  double p_up = 0.5;
};

struct JumpDiffusionPath {
  PricePath path;
  std::vector<std::size_t> jump_indices;
};

/// GBM with multiplicative jumps. At most one jump per step, with probability
/// 1 - exp(-intensity * dt). The diffusive part uses the same stream as
/// gen_gbm, so intensity 0 reproduces gen_gbm exactly.
JumpDiffusionPath gen_jump_diffusion(double s0, double mu, double sigma, double intensity, const JumpLaw& law,
                                     std::size_t steps, double horizon, std::uint64_t seed);

PricePath refine_grid(const PricePath& path, std::size_t factor);

ReturnPath returns_from_path(const PricePath& path);

}  // namespace taxflow
