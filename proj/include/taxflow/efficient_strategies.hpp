#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "taxflow/market_paths.hpp"
#include "taxflow/tax_flow.hpp"

namespace taxflow {

/// Shares held as a nondecreasing, nonnegative function of the price.
class FeedbackRule {
 public:
  enum class Kind { Linear, Power, Tabulated };

  /// slope * s + intercept.
  static FeedbackRule linear(double slope, double intercept = 0.0);
  /// scale * s^exponent, exponent > 0.
  static FeedbackRule power(double scale, double exponent);
  /// Piecewise linear through (prices[i], shares[i]), flat outside the table.
  static FeedbackRule tabulated(std::vector<double> prices, std::vector<double> shares);

  Kind kind() const noexcept { return kind_; }
  std::string describe() const;

  double operator()(double s) const;
  /// Antiderivative with G(0) = 0.
  double antiderivative(double s) const;
  /// sup{s >= 0 : g(s) <= y}; 0 if the set is empty, +inf if g never exceeds y.
  double inverse(double y) const;
  double derivative(double s) const;

 private:
  FeedbackRule(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
  Kind kind_;
  double a_ = 0.0;
  double b_ = 0.0;
  std::vector<double> xs_, ys_, cum_;  // tabulated nodes and G at the nodes
};

/// Holds g(S_k) after trading at t_k, including the horizon.
ElementaryStrategy feedback_strategy(const FeedbackRule& rule, const PricePath& prices);

/// True iff the positions after trading are a nondecreasing function of the
/// price along the path, the condition under which the closed forms apply.
bool monotone_response(const ElementaryStrategy& phi, const PricePath& prices);

/// Book profit of the x-th share at t_k for phi = g(S) in the continuous limit.
double closed_form_book_profit(const FeedbackRule& rule, const PricePath& prices, std::size_t k, double x);

struct ClosedFormTax {
  TaxFlow flow;
  std::vector<double> minimum_part;  // alpha (G(min S) - G(S_0)), nonincreasing
  std::vector<double> covariation;   // [g(S), S], nondecreasing
};

/// alpha (G(min S) - G(S_0)) - alpha/2 [g(S), S]. With `liquidate`, the right
/// value at the horizon also carries the tax of selling the whole position.
ClosedFormTax closed_form_tax(const FeedbackRule& rule, const PricePath& prices, double alpha, bool liquidate = false);

/// Running sum of (phi_{k+} - phi_k)(S_k - S_{k-1}).
std::vector<double> quadratic_covariation(const ElementaryStrategy& phi, const PricePath& prices);

struct ConvergenceRow {
  std::size_t n = 0;
  double mesh = 0.0;
  double engine_pi_T = 0.0;       // median over paths
  double closed_form_pi_T = 0.0;  // median over paths
  double abs_error = 0.0;         // median over paths
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  std::vector<std::vector<double>> errors;  // [level][path]
  bool closed_form_nonpositive = true;
  double scale = 0.0;  // alpha sigma^2 T g'(s0) / 2
};

struct CrrSetup {
  double s0 = 100.0;
  double sigma = 0.2;
  double horizon = 1.0;
  double alpha = 0.25;
  std::size_t paths = 100;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

/// Grid engine versus closed form at the horizon for each step count.
ConvergenceStudy convergence_study(const FeedbackRule& rule, const CrrSetup& setup, const std::vector<std::size_t>& steps);

struct RefinementRow {
  std::size_t n = 0;  // finer of the two compared levels
  double mesh = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

/// Cauchy evidence: one fine CRR path per sample; level l trades g(S) at the
/// coarse points of a grid with coarse_steps[l] intervals and holds in between.
/// Row l compares levels l and l + 1 by up_distance on the fine grid.
std::vector<RefinementRow> refinement_study(const FeedbackRule& rule, const CrrSetup& setup, std::size_t fine_steps,
                                            const std::vector<std::size_t>& coarse_steps);

double quantile(std::vector<double> values, double q);

std::string convergence_csv(const ConvergenceStudy& study);
std::string refinement_csv(const std::vector<RefinementRow>& rows);

}  // namespace taxflow
