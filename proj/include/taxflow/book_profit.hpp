#pragma once

#include <cstddef>
#include <vector>

namespace taxflow {

/// One block of shares with a common book profit per share.
struct ProfitSegment {
  double width = 0.0;   // shares
  double profit = 0.0;  // currency per share
  bool operator==(const ProfitSegment&) const = default;
};

/// Left-continuous step function x -> F(t, x) on (0, total_width], zero beyond.
///
/// Segments are laid out left to right: the first segment covers
/// (0, w_0], the next (w_0, w_0 + w_1], and so on. Shares with the lowest
/// book profit (sold first) come first.
class BookProfitFunction {
 public:
  BookProfitFunction() = default;
  explicit BookProfitFunction(std::vector<ProfitSegment> segments);

  const std::vector<ProfitSegment>& segments() const noexcept { return segments_; }
  double total_width() const noexcept;

  /// F(x); left-continuous, 0 outside (0, total_width].
  double evaluate(double x) const;
  /// F(x+), the right limit.
  double evaluate_right(double x) const;

  /// Integral of F over (0, upper].
  double integrate(double upper) const;
  double integral() const { return integrate(total_width()); }

  /// Integral of min(F + shift, 0) over (0, total_width].
  double integrate_negative_part(double shift) const;

  bool nondecreasing() const noexcept;
  bool nonnegative() const noexcept;

  /// Drops empty segments and merges neighbours with equal profit.
  BookProfitFunction normalized() const;

 private:
  std::vector<ProfitSegment> segments_;
};

}  // namespace taxflow
