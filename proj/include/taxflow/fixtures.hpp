#pragma once

#include <string>
#include <vector>

#include "taxflow/market_paths.hpp"
#include "taxflow/tax_flow.hpp"

namespace taxflow {

/// A deterministic market plus strategy on the integer grid.
struct Fixture {
  std::string name;
  PricePath prices;
  DividendPath dividends;
  ElementaryStrategy strategy;
};

/// Five dates, a sale of four shares at a gain of one, then a one-unit wash-sale loss.
Fixture figure2_fixture();

/// A dividend of 1000 per share paid together with a price drop of 1000: the
/// 55 shares with smaller book profit are wash-sold, and 20 shares are bought
/// with the proceeds.
Fixture figure3_fixture();

/// Names accepted by fixture_by_name.
std::vector<std::string> fixture_names();
Fixture fixture_by_name(const std::string& name);

}  // namespace taxflow
