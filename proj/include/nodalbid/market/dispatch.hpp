#pragma once

#include "nodalbid/market/case.hpp"
#include "nodalbid/opt/lp.hpp"

namespace nodalbid::market {

/// Primal dispatch plus every dual of the clearing LP.
struct DispatchSolution {
  Eigen::VectorXd P_G, P_D, theta;
  Eigen::VectorXd lambda;             // one per bus
  Eigen::VectorXd sigma, delta;       // generator lower/upper duals
  Eigen::VectorXd zeta, xi;           // demand lower/upper duals
  Eigen::VectorXd phi, psi;           // per finite-capacity line
  double objective = 0.0;
};

/// Effective price bids of one (slot, scenario) cell: scenario factors scale
/// non-strategic generator and load bids; strategic bids come from the caller.
struct SlotParams {
  Eigen::VectorXd a;  // per generator
  Eigen::VectorXd b;  // per load
};

SlotParams slot_params(const MarketCase& c, const Eigen::VectorXd& strategic_bids,
                       int slot, int scenario);

/// The clearing LP: min a^T P_G - b^T P_D subject to balance, box bounds and
/// finite line capacities. Variables ordered [P_G | P_D | theta].
opt::LinearProgram build_dispatch_lp(const MarketCase& c,
                                     const Eigen::VectorXd& strategic_bids,
                                     int slot = 1, int scenario = 1);

/// Solve the clearing LP; throws std::runtime_error on infeasibility.
DispatchSolution solve_dispatch(const MarketCase& c,
                                const Eigen::VectorXd& strategic_bids,
                                int slot = 1, int scenario = 1);

struct KktReport {
  double stationarity = 0.0;   // max-norm over the three stationarity systems
  double complementarity = 0.0;
  double feasibility = 0.0;    // primal constraint violation
  double sign = 0.0;           // negative-dual violation
  double max() const;
};

KktReport kkt_residuals(const MarketCase& c, const Eigen::VectorXd& strategic_bids,
                        const DispatchSolution& sol, int slot = 1, int scenario = 1);

/// Revenue minus cost of the strategic fleet at the given dispatch.
double strategic_profit(const MarketCase& c, const DispatchSolution& sol);

/// candidate / reference; throws std::invalid_argument when reference <= 0.
double compute_optimality(double candidate_profit, double reference_profit);

}  // namespace nodalbid::market
