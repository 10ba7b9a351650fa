#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nodalbid::opt {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Sparse row of a linear program: sum_j coef_j * x_{col_j} in [lo, up].
struct LpRow {
  std::vector<int> cols;
  std::vector<double> vals;
  double lo = -kInf;
  double up = kInf;

  void add(int col, double val) {
    if (val == 0.0) return;
    cols.push_back(col);
    vals.push_back(val);
  }
};

/// min c^T x + offset  s.t.  row bounds and variable bounds.
struct LinearProgram {
  int num_vars = 0;
  Eigen::VectorXd obj;
  double obj_offset = 0.0;
  Eigen::VectorXd lb, ub;
  std::vector<LpRow> rows;

  int add_var(double lo, double hi, double cost);
  LpRow& add_row(double lo, double hi);
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterLimit };

enum class VarStatus : unsigned char { kBasic, kAtLower, kAtUpper, kNonbasicFree };

/// Basis snapshot usable for warm starts. Column indices cover structurals
/// [0, n) followed by one logical per row [n, n+m).
struct LpBasis {
  std::vector<int> basic;
  std::vector<VarStatus> vstat;
  bool valid() const { return !basic.empty(); }
};

struct LpSolution {
  LpStatus status = LpStatus::kIterLimit;
  double obj = 0.0;
  Eigen::VectorXd x;        // structural values
  Eigen::VectorXd row_dual; // y, one per row; >= 0 when the lower side binds
  Eigen::VectorXd red_cost; // c - A^T y per structural variable
  Eigen::VectorXd row_act;  // row activities
  LpBasis basis;
  int iterations = 0;
};

struct LpOptions {
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
  int max_iter = 200000;
  int refactor_every = 80;
};

/// Bounded-variable revised simplex over a sparse LU of the basis.
class SimplexSolver {
 public:
  explicit SimplexSolver(const LinearProgram& lp, LpOptions opts = {});
  ~SimplexSolver();
  SimplexSolver(const SimplexSolver&) = delete;
  SimplexSolver& operator=(const SimplexSolver&) = delete;

  LpSolution solve();
  /// Re-solve after bound changes, starting from a previous basis
  /// (dual simplex first, primal cleanup if needed).
  LpSolution solve_warm(const LpBasis& start);

  void set_var_bounds(int var, double lo, double hi);

 private:
  struct Impl;
  Impl* impl_;
};

/// One-shot convenience wrapper.
LpSolution solve_lp(const LinearProgram& lp, LpOptions opts = {});

}  // namespace nodalbid::opt
