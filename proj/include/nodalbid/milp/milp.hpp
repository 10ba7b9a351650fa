#pragma once

#include <iosfwd>
#include <vector>

#include "nodalbid/opt/mip.hpp"
#include "nodalbid/qcqp/qcqp.hpp"

namespace nodalbid::milp {

/// Per-family bound (generation, demand, flow); zero means "derive from the
/// case".
struct BigMFamily {
  double gen = 0.0, dem = 0.0, flow = 0.0;
};

/// Disjunctive big-M bounds for the complementarity pairs. Derived defaults:
/// M_primal = 2 max(p_max, C, P_D^max) per family and M_dual = 10 max bid.
struct BigMConfig {
  BigMFamily primal, dual;
  bool check_tightness = true;

  /// Resolved, validated bounds for a concrete case; throws
  /// std::invalid_argument on non-positive or infinite values.
  BigMConfig resolved(const market::MarketCase& c) const;
};

enum class PairFix { kKeepBinary, kFixPrimalSlack, kFixDualFactor };

/// classification[block][pair], one entry per complementarity pair per (t,k).
using Classification = std::vector<std::vector<PairFix>>;

/// Mixed-integer reformulation of the (multi-block) MPEC: continuous
/// variables are the stacked QCQP vectors x per block, followed by one
/// binary per kept complementarity pair; the bilinear strategic revenue is
/// replaced by its lower-level strong-duality linearization.
struct MilpProblem {
  opt::MipProblem mip;
  int n = 0;       // continuous variables per block
  int blocks = 1;
  int Z = 0;       // complementarity pairs per block
  int G = 0, D = 0, Lf = 0;  // pair family extents, layout order
  BigMConfig cfg;  // resolved bounds
  /// family big-M of a pair, dual side or primal side
  double pair_M(int pair, bool dual_side) const;
  /// flat (block * Z + pair) -> binary column, or -1 when the pair is fixed
  std::vector<int> binary_of;
  /// flat (block * Z + pair) -> the pair's factors, for diagnostics
  std::vector<qcqp::ComplementarityPair> pairs;

  int var(int block, int index) const { return block * n + index; }
  /// Per-block x vectors from a full solution vector.
  std::vector<Eigen::VectorXd> split(const Eigen::VectorXd& x) const;
};

/// Full baseline reformulation: every pair keeps its binary.
MilpProblem build_milp(const qcqp::MultiQcqp& multi, const BigMConfig& cfg = {});

/// Algorithm variant with pairs fixed to one branch: fix-primal-slack pins
/// the slack to zero, fix-dual-factor pins the dual variable to zero, and
/// only keep-binary pairs receive binaries.
MilpProblem build_augmented_milp(const qcqp::MultiQcqp& multi, const Classification& cls,
                                 const BigMConfig& cfg = {});

/// |bilinear strategic revenue - linearized revenue| at a dispatch KKT point.
double verify_linearization(const market::MarketCase& c,
                            const market::DispatchSolution& sol,
                            const Eigen::VectorXd& strategic_bids,
                            int slot = 1, int scenario = 1);

/// A pair whose continuous value sits within tol of its big-M bound at the
/// incumbent; a non-empty list means the bounds may have truncated the
/// optimum.
struct TightPair {
  int block = 0;
  int pair = 0;
  bool dual_side = false;
  double value = 0.0;
};
std::vector<TightPair> check_bigM_tightness(const MilpProblem& m, const Eigen::VectorXd& x,
                                            double tol = 1e-6);

/// CPLEX-LP-format text export for cross-solver verification.
void export_lp_format(const MilpProblem& m, std::ostream& out);

struct MilpResult {
  opt::MipStatus status = opt::MipStatus::kInfeasible;
  double profit = 0.0;  // incumbent expected strategic profit
  double bound = opt::kInf;  // proven upper bound on the profit
  double gap = opt::kInf;
  std::vector<Eigen::VectorXd> x;  // per block
  std::vector<TightPair> tight;    // big-M tightness diagnostics
  long nodes = 0;
};

/// Solve through the branch-and-bound engine; optional warm start is a full
/// variable vector (continuous blocks + binaries).
MilpResult solve_milp(const MilpProblem& m, opt::MipOptions opts = {},
                      const Eigen::VectorXd* start = nullptr);

/// Full warm-start vector from per-block continuous solutions: binaries are
/// set from each pair's active side.
Eigen::VectorXd warm_start_vector(const MilpProblem& m, const std::vector<Eigen::VectorXd>& x);

}  // namespace nodalbid::milp
