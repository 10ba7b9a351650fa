#include "nodalbid/market/case.hpp"

namespace nodalbid::market {

namespace {

// 30-bus, 41-line topology with standard per-unit reactances.
// from, to, reactance
constexpr double kLines[41][3] = {
    {1, 2, 0.0575},   {1, 3, 0.1652},   {2, 4, 0.1737},   {3, 4, 0.0379},
    {2, 5, 0.1983},   {2, 6, 0.1763},   {4, 6, 0.0414},   {5, 7, 0.1160},
    {6, 7, 0.0820},   {6, 8, 0.0420},   {6, 9, 0.2080},   {6, 10, 0.5560},
    {9, 11, 0.2080},  {9, 10, 0.1100},  {4, 12, 0.2560},  {12, 13, 0.1400},
    {12, 14, 0.2559}, {12, 15, 0.1304}, {12, 16, 0.1987}, {14, 15, 0.1997},
    {16, 17, 0.1923}, {15, 18, 0.2185}, {18, 19, 0.1292}, {19, 20, 0.0680},
    {10, 20, 0.2090}, {10, 17, 0.0845}, {10, 21, 0.0749}, {10, 22, 0.1499},
    {21, 22, 0.0236}, {15, 23, 0.2020}, {22, 24, 0.1790}, {23, 24, 0.2700},
    {24, 25, 0.3292}, {25, 26, 0.3800}, {25, 27, 0.2087}, {28, 27, 0.3960},
    {27, 29, 0.4153}, {27, 30, 0.6027}, {29, 30, 0.4533}, {8, 28, 0.2000},
    {6, 28, 0.0599}};

// Hourly load price bids of the two time-varying loads ($/MWh, hours 1..24).
constexpr double kBus26Bids[24] = {43.5, 41.6, 33.7, 36.1, 35.5, 43.9, 48.2, 58.0,
                                   41.0, 46.2, 41.9, 43.8, 43.9, 45.0, 44.0, 42.5,
                                   48.4, 58.4, 63.0, 72.4, 65.7, 59.1, 52.7, 48.7};
constexpr double kBus29Bids[24] = {42.4, 38.0, 35.8, 38.0, 38.2, 40.5, 54.3, 60.0,
                                   53.1, 47.0, 44.5, 45.8, 41.6, 41.7, 44.9, 48.9,
                                   48.8, 59.2, 62.1, 68.2, 64.0, 62.4, 53.1, 45.0};

// Non-strategic fleet (reconstructed: bus placement follows the standard
// 30-bus generator buses plus two infill units; capacities and bids are
// plausible merit-order values, not published data).
// bus, pmax, bid
constexpr double kGens[8][3] = {{1, 0.80, 20.0},  {2, 0.80, 25.0}, {5, 0.50, 30.0},
                                {8, 0.35, 35.0},  {11, 0.30, 40.0}, {13, 0.40, 44.0},
                                {15, 0.30, 50.0}, {20, 0.30, 58.0}};

// Strategic units: buses and marginal costs from the study definition;
// capacity 1 GW each (10 p.u. at a 100 MVA base).
constexpr double kStrategic[4][2] = {{4, 45.84}, {16, 47.84}, {24, 55.56}, {30, 63.88}};

// Load buses and maximum demands (reconstructed from the standard 30-bus
// demand profile, p.u. at 100 MVA); bids are the flat 72 $/MWh except for
// the hourly series at buses 26 and 29.
constexpr double kLoads[16][2] = {{2, 0.217},  {3, 0.024},  {4, 0.076},  {7, 0.228},
                                  {8, 0.300},  {10, 0.058}, {12, 0.112}, {15, 0.082},
                                  {16, 0.035}, {17, 0.090}, {18, 0.032}, {19, 0.095},
                                  {21, 0.175}, {23, 0.032}, {26, 0.035}, {29, 0.024}};

}  // namespace

MarketCase ieee30_case() {
  MarketCase c;
  c.num_buses = 30;
  for (const auto& l : kLines) {
    Line ln;
    ln.from = static_cast<int>(l[0]);
    ln.to = static_cast<int>(l[1]);
    ln.reactance = l[2];
    c.lines.push_back(ln);
  }
  c.lines[2].capacity = 0.2;  // the single congested line, bus 2 - bus 4

  for (const auto& g : kGens) {
    Generator gen;
    gen.bus = static_cast<int>(g[0]);
    gen.p_max = g[1];
    gen.bid = g[2];
    c.generators.push_back(gen);
  }
  for (const auto& s : kStrategic) {
    Generator gen;
    gen.bus = static_cast<int>(s[0]);
    gen.p_max = 10.0;
    gen.strategic = true;
    gen.cost = s[1];
    gen.bid = s[1];
    c.generators.push_back(gen);
  }
  for (const auto& d : kLoads) {
    Load ld;
    ld.bus = static_cast<int>(d[0]);
    ld.p_max = d[1];
    if (ld.bus == 26)
      ld.bid.assign(kBus26Bids, kBus26Bids + 24);
    else if (ld.bus == 29)
      ld.bid.assign(kBus29Bids, kBus29Bids + 24);
    else
      ld.bid = {72.0};
    c.loads.push_back(ld);
  }
  c.ramp = 0.3;
  c.scenarios.clear();
  for (int k = 0; k < 20; ++k) c.scenarios.push_back(2.0 - 0.1 * k);
  c.horizon = 1;
  c.validate();
  return c;
}

}  // namespace nodalbid::market
