#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nodalbid::market {

/// Transmission line; capacity in p.u., infinity means unbounded flow.
struct Line {
  int from = 0;
  int to = 0;
  double reactance = 0.0;
  double capacity = std::numeric_limits<double>::infinity();
  bool bounded() const { return std::isfinite(capacity); }
};

struct Generator {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0;
  double bid = 0.0;        // $/MWh; decision variable when strategic
  bool strategic = false;
  double cost = 0.0;       // marginal cost, strategic units only
};

struct Load {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0;
  std::vector<double> bid;  // $/MWh; length 1 (flat) or 24 (hourly)
};

/// A full market instance. Buses are numbered 1..num_buses in input but
/// stored 0-based internally via the accessors below.
struct MarketCase {
  int num_buses = 0;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  int horizon = 1;                       // T
  int hour_offset = 0;                   // slot t covers hour offset+t
  std::vector<double> scenarios = {1.0}; // K equally likely scaling factors
  double ramp = 0.3;                     // Gamma, p.u. per slot

  int num_strategic() const;
  std::vector<int> strategic_idx() const;   // generator indices, case order
  std::vector<int> finite_line_idx() const; // lines with bounded capacity
  double load_bid(int load, int slot) const; // slot is 1-based
  Eigen::MatrixXd incidence() const;         // A, |N| x |L|
  void validate() const;  // throws std::invalid_argument with context
};

/// Parse a case from JSON-structured text (see README for the schema).
MarketCase load_case(const std::string& text);
MarketCase load_case_file(const std::string& path);

/// Built-in 30-bus study system.
MarketCase ieee30_case();

/// Grow a case to target_buses by appending buses, generators, and loads
/// with balanced added generation and load.
MarketCase extend_network(const MarketCase& base, int target_buses);

}  // namespace nodalbid::market
