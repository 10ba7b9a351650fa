#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nodalbid/recovery/recovery.hpp"

namespace nodalbid::bench {

/// Replace the scenario factor set of a case; factors must be positive.
market::MarketCase scale_scenarios(market::MarketCase c, const std::vector<double>& factors);

/// Leading K entries of the built-in 20-factor scenario table
/// (2.0, 1.9, ..., 0.1); requires 1 <= K <= 20.
std::vector<double> scenario_table(int K);

struct OracleResult {
  double profit = 0.0;
  Eigen::VectorXd bids;   // best grid point per strategic unit
  long evaluations = 0;   // dispatch solves performed
};

/// Exhaustive bid-grid search: every combination of grid values across the
/// strategic units, expected profit averaged over the case's scenarios and
/// summed over its horizon, one dispatch solve per (slot, scenario) cell.
/// Throws on an empty grid or when the required dispatch-solve count
/// exceeds the budget.
OracleResult brute_force_oracle(const market::MarketCase& c, const std::vector<double>& grid,
                                long budget = 50'000'000);

/// Uniform grid lo..hi inclusive with the given step.
std::vector<double> bid_grid(double lo, double hi, double step);

enum class SweepAxis { kScenarios, kHorizon, kLineCapacity, kRamp, kBuses };
enum class Method { kRecovery, kBaselineMilp, kBruteForce };

const char* method_name(Method m);
const char* axis_name(SweepAxis a);
SweepAxis parse_axis(const std::string& s);  // throws on unknown axis

struct ExperimentSpec {
  market::MarketCase base;
  SweepAxis axis = SweepAxis::kScenarios;
  std::vector<double> values;  // axis values (counts for scenarios/horizon/buses)
  std::vector<Method> methods = {Method::kRecovery, Method::kBaselineMilp};
  double time_limit = 0.0;     // seconds per reformulation solve, 0 = none
  double oracle_step = 0.01;   // brute-force bid grid step
  double oracle_max_bid = 0.0; // 0 = derive from the case bids
  recovery::RecoveryConfig recovery;
};

struct ResultRow {
  std::string method;
  double sweep = 0.0;
  double profit = 0.0;
  double optimality = 0.0;  // vs the best available reference
  double gap_pct = 0.0;     // (relaxation bound - reference) / reference
  double time_s = 0.0;
  int iterations = 0;       // recovery reformulation solves
  std::string status;
};

/// Apply one sweep value to the base case (scenario count, horizon, finite
/// line capacity, ramp, or extended bus count).
market::MarketCase materialize(const market::MarketCase& base, SweepAxis axis, double value);

/// One row per (method, sweep value); per-row solver errors are recorded in
/// the status column, not thrown.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

enum class ReportFormat { kCsv, kJson };
void emit_report(const std::vector<ResultRow>& table, std::ostream& out, ReportFormat fmt);
std::vector<ResultRow> parse_report(std::istream& in, ReportFormat fmt);

}  // namespace nodalbid::bench
