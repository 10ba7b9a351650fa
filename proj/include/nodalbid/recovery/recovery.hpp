#pragma once

#include <iosfwd>
#include <vector>

#include "nodalbid/milp/milp.hpp"
#include "nodalbid/sdp/relax.hpp"

namespace nodalbid::recovery {

/// One complementarity pair measured at the relaxation candidate: the
/// magnitudes of its dual factor and primal slack, and the branch decision
/// implied by the (eps, delta) thresholds.
struct PairMeasure {
  double dual_mag = 0.0;
  double slack_mag = 0.0;
  milp::PairFix decision = milp::PairFix::kKeepBinary;
};

struct SlacknessClassification {
  double eps = 0.0, delta = 0.0;
  std::vector<std::vector<PairMeasure>> pairs;  // [block][pair]

  milp::Classification decisions() const;
  int count(milp::PairFix f) const;
};

/// Measure every pair of every block at the lifted candidate x (one vector
/// per block): fix the primal slack when the dual factor is decisively
/// active (|slack| <= eps, |dual| >= delta), fix the dual factor in the
/// mirrored case, keep the binary otherwise. Requires eps > 0 and
/// delta > eps.
SlacknessClassification classify(const qcqp::MultiQcqp& multi,
                                 const std::vector<Eigen::VectorXd>& x, double eps,
                                 double delta);

struct RecoveryConfig {
  double eps0 = 0.1;
  double delta = 1.0;
  double eps_step = 0.01;
  double feas_tol = 1e-6;
  milp::BigMConfig bigm;
  opt::MipOptions mip;
};

struct RecoveryIteration {
  double eps = 0.0;
  int fixed_primal = 0, fixed_dual = 0, kept = 0;
  opt::MipStatus status = opt::MipStatus::kInfeasible;
  double objective = 0.0;  // incumbent expected profit when one exists
};

struct RecoveryReport {
  bool early_exit = false;    // candidate already feasible, zero MILP solves
  bool used_baseline = false; // degraded to the full reformulation
  std::vector<RecoveryIteration> iterations;
  std::vector<Eigen::VectorXd> x;  // final per-block solution
  double profit = 0.0;             // expected strategic profit of x
  double residual = opt::kInf;     // max constraint violation of x
  double relaxation_bound = 0.0;   // objective of the relaxation used
  double sdp_seconds = 0.0, milp_seconds = 0.0;

  /// Structured text dump for the bench harness.
  void write(std::ostream& out) const;
};

/// Feasible-solution recovery from a solved relaxation: exit immediately
/// when the lifted candidate already satisfies every constraint; otherwise
/// solve augmented reformulations with progressively fewer fixed pairs
/// (classification always re-measured at the original candidate), ending at
/// the full baseline when eps underflows. Throws std::runtime_error when
/// even the baseline fails.
RecoveryReport algorithm1(const qcqp::MultiQcqp& multi, const sdp::MomentSolution& moment,
                          const RecoveryConfig& cfg = {});

/// Convenience wrapper: build and solve the relaxation, then recover.
RecoveryReport recover(const qcqp::MultiQcqp& multi, const RecoveryConfig& cfg = {});

}  // namespace nodalbid::recovery
