#include "taxflow/book_profit.hpp"

#include <algorithm>

#include "taxflow/error.hpp"

namespace taxflow {

BookProfitFunction::BookProfitFunction(std::vector<ProfitSegment> segments) : segments_(std::move(segments)) {
  for (const auto& s : segments_) require(s.width >= 0.0, "book profit function: negative segment width");
}

double BookProfitFunction::total_width() const noexcept {
  double w = 0.0;
  for (const auto& s : segments_) w += s.width;
  return w;
}

double BookProfitFunction::evaluate(double x) const {
  if (x <= 0.0) return 0.0;
  double right = 0.0;
  for (const auto& s : segments_) {
    if (s.width <= 0.0) continue;
    right += s.width;
    if (x <= right) return s.profit;
  }
  return 0.0;
}

double BookProfitFunction::evaluate_right(double x) const {
  if (x < 0.0) return 0.0;
  double right = 0.0;
  for (const auto& s : segments_) {
    if (s.width <= 0.0) continue;
    right += s.width;
    if (x < right) return s.profit;
  }
  return 0.0;
}

double BookProfitFunction::integrate(double upper) const {
  double acc = 0.0;
  double left = 0.0;
  for (const auto& s : segments_) {
    if (left >= upper) break;
    const double take = std::min(s.width, upper - left);
    acc += take * s.profit;
    left += s.width;
  }
  return acc;
}

double BookProfitFunction::integrate_negative_part(double shift) const {
  double acc = 0.0;
  for (const auto& s : segments_) {
    const double v = s.profit + shift;
    if (v < 0.0) acc += s.width * v;
  }
  return acc;
}

bool BookProfitFunction::nondecreasing() const noexcept {
  for (std::size_t i = 1; i < segments_.size(); ++i)
    if (segments_[i].profit < segments_[i - 1].profit) return false;
  return true;
}

bool BookProfitFunction::nonnegative() const noexcept {
  return std::all_of(segments_.begin(), segments_.end(), [](const ProfitSegment& s) { return s.profit >= 0.0; });
}

BookProfitFunction BookProfitFunction::normalized() const {
  std::vector<ProfitSegment> out;
  for (const auto& s : segments_) {
    if (s.width <= 0.0) continue;
    if (!out.empty() && out.back().profit == s.profit)
      out.back().width += s.width;
    else
      out.push_back(s);
  }
  return BookProfitFunction(std::move(out));
}

}  // namespace taxflow
