#pragma once

#include <vector>

#include <Eigen/Dense>

#include "nodalbid/opt/lp.hpp"

namespace nodalbid::opt {

/// Conic program over a product of dense PSD blocks, a nonnegative orthant
/// and free variables:
///
///   min  sum_k <C_k, X_k> + c_n^T s + c_f^T u
///   s.t. sum_k <A_ik, X_k> + a_in^T s + a_if^T u  {=, >=, <=}  b_i
///        X_k psd,  s >= 0,  u free
///
/// Every PSD coefficient A_ik is a sum of rank-two terms
/// coef * sym(p_a p_b^T) referencing columns of the block's vector pool.
/// The solver exploits this structure when assembling normal equations.
struct ConicProblem {
  struct PsdBlock {
    int dim = 0;
    Eigen::MatrixXd pool;  // dim x npool, columns referenced by Term
  };
  struct Term {
    int block = 0;
    int a = 0, b = 0;  // pool column indices
    double coef = 1.0;
  };
  struct Row {
    std::vector<Term> terms;
    std::vector<std::pair<int, double>> nonneg;  // (var, coef)
    std::vector<std::pair<int, double>> free_;   // (var, coef)
    double rhs = 0.0;
    char sense = '=';  // '=', '>', '<'
  };

  std::vector<PsdBlock> blocks;
  std::vector<Eigen::MatrixXd> C;  // objective per block, symmetric
  int num_nonneg = 0;
  int num_free = 0;
  Eigen::VectorXd c_nonneg, c_free;  // may be empty when counts are zero
  std::vector<Row> rows;

  int add_block(int dim, Eigen::MatrixXd pool);
  Row& add_row(char sense, double rhs);
};

enum class ConicStatus {
  kOptimal,
  kPrimalInfeasible,
  kDualInfeasible,
  kMaxIter,
  kNumerical
};

struct ConicSolution {
  ConicStatus status = ConicStatus::kNumerical;
  double pobj = 0.0, dobj = 0.0;
  // best dual objective observed at a near-feasible dual iterate; a valid
  // lower bound on the optimal value even when the returned iterate is not
  // the most advanced one
  double dual_bound = -kInf;
  double gap = kInf;          // relative duality gap
  double prim_res = kInf, dual_res = kInf;
  std::vector<Eigen::MatrixXd> X;  // primal PSD blocks
  std::vector<Eigen::MatrixXd> S;  // dual PSD blocks
  Eigen::VectorXd s_nonneg, u_free;
  Eigen::VectorXd y;  // one multiplier per row, sign: lagrangian c - A^T y
  int iterations = 0;
};

struct ConicOptions {
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  int max_iter = 120;
  bool use_float_factor = false;  // single-precision Schur factor + refinement
  double time_limit = kInf;       // seconds
  bool verbose = false;
};

/// Infeasible primal-dual interior-point method with Nesterov-Todd scaling
/// and Mehrotra predictor-corrector steps.
ConicSolution solve_conic(const ConicProblem& prob, ConicOptions opts = {});

}  // namespace nodalbid::opt
