#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nodalbid/opt/lp.hpp"

using namespace nodalbid::opt;

namespace {

// Reference solver for tiny LPs: enumerate all candidate vertices by
// activating n constraints (row sides and variable bounds) at equality,
// keep the feasible ones, return the best objective. Assumes all
// variables have finite bounds, so the feasible set is a polytope and
// infeasibility is equivalent to "no feasible vertex".
struct VertexOracle {
  bool feasible = false;
  double obj = 0.0;
  Eigen::VectorXd x;
};

VertexOracle enumerate_lp(const LinearProgram& lp) {
  const int n = lp.num_vars;
  const int m = static_cast<int>(lp.rows.size());
  std::vector<Eigen::VectorXd> normals;
  std::vector<double> rhs;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  for (int i = 0; i < m; ++i)
    for (size_t k = 0; k < lp.rows[i].cols.size(); ++k)
      A(i, lp.rows[i].cols[k]) += lp.rows[i].vals[k];
  for (int i = 0; i < m; ++i) {
    if (std::isfinite(lp.rows[i].lo)) {
      normals.push_back(A.row(i));
      rhs.push_back(lp.rows[i].lo);
    }
    if (std::isfinite(lp.rows[i].up)) {
      normals.push_back(A.row(i));
      rhs.push_back(lp.rows[i].up);
    }
  }
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[j] = 1.0;
    if (std::isfinite(lp.lb[j])) {
      normals.push_back(e);
      rhs.push_back(lp.lb[j]);
    }
    if (std::isfinite(lp.ub[j])) {
      normals.push_back(e);
      rhs.push_back(lp.ub[j]);
    }
  }
  const int nc = static_cast<int>(normals.size());
  VertexOracle best;
  std::vector<int> pick(n);
  const double ftol = 1e-7;
  // iterate over all n-subsets of the constraint list
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  auto advance = [&]() {
    int p = n - 1;
    while (p >= 0 && idx[p] == nc - n + p) --p;
    if (p < 0) return false;
    ++idx[p];
    for (int q = p + 1; q < n; ++q) idx[q] = idx[q - 1] + 1;
    return true;
  };
  if (nc < n) return best;
  do {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
      M.row(i) = normals[idx[i]];
      b[i] = rhs[idx[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) continue;
    Eigen::VectorXd x = lu.solve(b);
    bool ok = true;
    for (int j = 0; j < n && ok; ++j)
      ok = x[j] >= lp.lb[j] - ftol && x[j] <= lp.ub[j] + ftol;
    for (int i = 0; i < m && ok; ++i) {
      double a = A.row(i).dot(x);
      ok = a >= lp.rows[i].lo - ftol && a <= lp.rows[i].up + ftol;
    }
    if (!ok) continue;
    double o = lp.obj.dot(x) + lp.obj_offset;
    if (!best.feasible || o < best.obj) {
      best.feasible = true;
      best.obj = o;
      best.x = x;
    }
  } while (advance());
  return best;
}

// KKT conditions for the solver output on an arbitrary LP.
void check_kkt(const LinearProgram& lp, const LpSolution& s, double tol = 1e-7) {
  const int n = lp.num_vars;
  const int m = static_cast<int>(lp.rows.size());
  for (int j = 0; j < n; ++j) {
    CHECK(s.x[j] >= lp.lb[j] - tol);
    CHECK(s.x[j] <= lp.ub[j] + tol);
  }
  for (int i = 0; i < m; ++i) {
    CHECK(s.row_act[i] >= lp.rows[i].lo - tol);
    CHECK(s.row_act[i] <= lp.rows[i].up + tol);
    // dual sign vs. binding side
    if (s.row_dual[i] > tol) CHECK(s.row_act[i] <= lp.rows[i].lo + tol);
    if (s.row_dual[i] < -tol) CHECK(s.row_act[i] >= lp.rows[i].up - tol);
  }
  for (int j = 0; j < n; ++j) {
    if (s.red_cost[j] > tol) CHECK(s.x[j] <= lp.lb[j] + tol);
    if (s.red_cost[j] < -tol) CHECK(s.x[j] >= lp.ub[j] - tol);
  }
  // stationarity: c - A^T y - z = 0 by construction of red_cost; verify
  Eigen::VectorXd aty = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    for (size_t k = 0; k < lp.rows[i].cols.size(); ++k)
      aty[lp.rows[i].cols[k]] += lp.rows[i].vals[k] * s.row_dual[i];
  for (int j = 0; j < n; ++j)
    CHECK(std::abs(lp.obj[j] - aty[j] - s.red_cost[j]) < tol);
}

}  // namespace

TEST_CASE("two-variable hand case") {
  // min -x - 2y  s.t. x + y <= 4, x <= 3, y <= 3, x,y >= 0
  LinearProgram lp;
  int x = lp.add_var(0, 3, -1);
  int y = lp.add_var(0, 3, -2);
  auto& r = lp.add_row(-kInf, 4);
  r.add(x, 1);
  r.add(y, 1);
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::kOptimal);
  CHECK(s.obj == doctest::Approx(-7.0));
  CHECK(s.x[0] == doctest::Approx(1.0));
  CHECK(s.x[1] == doctest::Approx(3.0));
  check_kkt(lp, s);
}

TEST_CASE("equality rows and duals") {
  // min x1 + 2 x2 + 3 x3  s.t. x1 + x2 + x3 = 6, x2 - x3 = 1, x in [0,5]
  LinearProgram lp;
  for (int j = 0; j < 3; ++j) lp.add_var(0, 5, j + 1.0);
  auto& r1 = lp.add_row(6, 6);
  r1.add(0, 1);
  r1.add(1, 1);
  r1.add(2, 1);
  auto& r2 = lp.add_row(1, 1);
  r2.add(1, 1);
  r2.add(2, -1);
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::kOptimal);
  VertexOracle o = enumerate_lp(lp);
  REQUIRE(o.feasible);
  CHECK(s.obj == doctest::Approx(o.obj));
  check_kkt(lp, s);
}

TEST_CASE("infeasible") {
  LinearProgram lp;
  int x = lp.add_var(0, 1, 1);
  auto& r = lp.add_row(2, kInf);
  r.add(x, 1);
  LpSolution s = solve_lp(lp);
  CHECK(s.status == LpStatus::kInfeasible);
}

TEST_CASE("unbounded") {
  LinearProgram lp;
  int x = lp.add_var(0, kInf, -1);
  int y = lp.add_var(0, kInf, 0);
  auto& r = lp.add_row(-kInf, 10);
  r.add(x, 1);
  r.add(y, -1);
  LpSolution s = solve_lp(lp);
  CHECK(s.status == LpStatus::kUnbounded);
}

TEST_CASE("bound flip optimum") {
  // optimum with a variable nonbasic at its upper bound
  LinearProgram lp;
  int x = lp.add_var(0, 2, -5);
  int y = lp.add_var(0, 2, -1);
  auto& r = lp.add_row(-kInf, 3);
  r.add(x, 1);
  r.add(y, 1);
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::kOptimal);
  CHECK(s.obj == doctest::Approx(-11.0));
  check_kkt(lp, s);
}

TEST_CASE("free variable") {
  // min x + y with free y appearing in an equality
  LinearProgram lp;
  int x = lp.add_var(0, 10, 1);
  int y = lp.add_var(-kInf, kInf, 1);
  auto& r = lp.add_row(4, 4);
  r.add(x, 1);
  r.add(y, 1);
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::kOptimal);
  CHECK(s.obj == doctest::Approx(4.0));
  check_kkt(lp, s);
}

TEST_CASE("random LPs vs vertex enumeration") {
  std::mt19937 rng(42);
  std::uniform_int_distribution<int> dn(2, 4), dm(1, 4);
  std::uniform_real_distribution<double> dc(-2, 2), db(-3, 3);
  int infeasible_seen = 0;
  for (int trial = 0; trial < 400; ++trial) {
    LinearProgram lp;
    int n = dn(rng), m = dm(rng);
    for (int j = 0; j < n; ++j) {
      double l = db(rng), u = l + std::abs(db(rng)) + 0.1;
      lp.add_var(l, u, dc(rng));
    }
    for (int i = 0; i < m; ++i) {
      int kind = trial % 3;  // mix of <=, >=, ==, ranged rows
      double b1 = db(rng), b2 = db(rng);
      double lo = -kInf, up = kInf;
      if (kind == 0)
        up = b1;
      else if (kind == 1)
        lo = b1;
      else {
        lo = std::min(b1, b2);
        up = std::max(b1, b2);
      }
      auto& r = lp.add_row(lo, up);
      for (int j = 0; j < n; ++j) {
        double a = dc(rng);
        if (std::abs(a) > 0.3) r.add(j, a);
      }
    }
    VertexOracle o = enumerate_lp(lp);
    LpSolution s = solve_lp(lp);
    if (!o.feasible) {
      ++infeasible_seen;
      CHECK(s.status == LpStatus::kInfeasible);
      continue;
    }
    REQUIRE(s.status == LpStatus::kOptimal);
    CHECK(s.obj == doctest::Approx(o.obj).epsilon(1e-6));
    check_kkt(lp, s);
  }
  CHECK(infeasible_seen > 0);  // the mix should exercise both outcomes
}

TEST_CASE("warm start after bound change matches fresh solve") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dc(-2, 2), db(-3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    LinearProgram lp;
    int n = 4;
    for (int j = 0; j < n; ++j) {
      double l = db(rng), u = l + std::abs(db(rng)) + 0.5;
      lp.add_var(l, u, dc(rng));
    }
    for (int i = 0; i < 3; ++i) {
      auto& r = lp.add_row(-kInf, db(rng) + 2.0);
      for (int j = 0; j < n; ++j) r.add(j, dc(rng));
    }
    SimplexSolver solver(lp);
    LpSolution s0 = solver.solve();
    if (s0.status != LpStatus::kOptimal) continue;
    // tighten one variable: branch-like change
    int j = trial % n;
    double mid = 0.5 * (lp.lb[j] + lp.ub[j]);
    solver.set_var_bounds(j, lp.lb[j], mid);
    LpSolution s1 = solver.solve_warm(s0.basis);

    LinearProgram lp2 = lp;
    lp2.ub[j] = mid;
    LpSolution ref = solve_lp(lp2);
    CHECK(s1.status == ref.status);
    if (ref.status == LpStatus::kOptimal)
      CHECK(s1.obj == doctest::Approx(ref.obj).epsilon(1e-7));
  }
}
