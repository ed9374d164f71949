#include "taxflow/fixtures.hpp"

#include <fmt/format.h>

#include "taxflow/error.hpp"

namespace taxflow {

Fixture figure2_fixture() {
  const TimeGrid g = TimeGrid::integer(4);
  return {"figure2", PricePath(g, {100, 103, 104, 105, 102}), DividendPath::zero(g),
          ElementaryStrategy(g, {0, 9, 10, 14, 10}, 10)};
}

Fixture figure3_fixture() {
  // Lots of 100 (bought at 5000), 30 (at 6300) and 25 (at 6812.5). Just before
  // the payout the book profits are 1812.5, 512.5 and 0, so the 25 + 30 lots
  // sit below the 1000 drop.
  const TimeGrid g = TimeGrid::integer(3);
  return {"figure3", PricePath(g, {5000, 6300, 6812.5, 5812.5}), DividendPath(g, {0, 0, 0, 1000}),
          ElementaryStrategy(g, {0, 100, 130, 155}, 175)};
}

std::vector<std::string> fixture_names() { return {"figure2", "figure3"}; }

Fixture fixture_by_name(const std::string& name) {
  if (name == "figure2") return figure2_fixture();
  if (name == "figure3") return figure3_fixture();
  fail(ErrorCode::Validation, fmt::format("unknown fixture '{}' (known: figure2, figure3)", name));
}

}  // namespace taxflow
