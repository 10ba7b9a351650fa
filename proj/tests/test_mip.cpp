#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nodalbid/opt/mip.hpp"

using namespace nodalbid::opt;

namespace {

// Reference: enumerate every 0/1 assignment of the integer variables and
// solve the remaining LP. Only valid when all int vars are binaries.
struct MipOracle {
  bool feasible = false;
  double obj = 0.0;
};

MipOracle enumerate_mip(const MipProblem& prob) {
  MipOracle best;
  const int k = static_cast<int>(prob.int_vars.size());
  for (int mask = 0; mask < (1 << k); ++mask) {
    LinearProgram lp = prob.lp;
    for (int b = 0; b < k; ++b) {
      double v = (mask >> b) & 1;
      lp.lb[prob.int_vars[b]] = v;
      lp.ub[prob.int_vars[b]] = v;
    }
    LpSolution s = solve_lp(lp);
    if (s.status != LpStatus::kOptimal) continue;
    if (!best.feasible || s.obj < best.obj) {
      best.feasible = true;
      best.obj = s.obj;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("knapsack hand case") {
  // max 10a + 6b + 4c s.t. a + b + c <= 2 (binaries) -> min form
  MipProblem p;
  int a = p.lp.add_var(0, 1, -10);
  int b = p.lp.add_var(0, 1, -6);
  int c = p.lp.add_var(0, 1, -4);
  auto& r = p.lp.add_row(-kInf, 2);
  r.add(a, 1);
  r.add(b, 1);
  r.add(c, 1);
  p.int_vars = {a, b, c};
  MipSolution s = solve_mip(p);
  REQUIRE(s.status == MipStatus::kOptimal);
  CHECK(s.obj == doctest::Approx(-16.0));
  CHECK(s.x[a] == doctest::Approx(1.0));
  CHECK(s.x[b] == doctest::Approx(1.0));
  CHECK(s.x[c] == doctest::Approx(0.0));
}

TEST_CASE("fractional relaxation forces branching") {
  // LP relaxation is fractional; integer optimum differs from LP bound.
  MipProblem p;
  int x = p.lp.add_var(0, 1, -1);
  int y = p.lp.add_var(0, 1, -1);
  auto& r = p.lp.add_row(-kInf, 1.5);
  r.add(x, 1);
  r.add(y, 1);
  p.int_vars = {x, y};
  MipSolution s = solve_mip(p);
  REQUIRE(s.status == MipStatus::kOptimal);
  CHECK(s.obj == doctest::Approx(-1.0));
  CHECK(s.bound <= s.obj + 1e-9);
}

TEST_CASE("infeasible integer problem") {
  // x + y = 1.5 with both binary has no integer solution
  MipProblem p;
  int x = p.lp.add_var(0, 1, 1);
  int y = p.lp.add_var(0, 1, 1);
  auto& r = p.lp.add_row(1.5, 1.5);
  r.add(x, 1);
  r.add(y, 1);
  p.int_vars = {x, y};
  MipSolution s = solve_mip(p);
  CHECK(s.status == MipStatus::kInfeasible);
}

TEST_CASE("mixed integer-continuous with equality coupling") {
  MipProblem p;
  int z = p.lp.add_var(0, 1, 5);     // binary fixed cost
  int q = p.lp.add_var(0, 4, -3);    // continuous, needs z on
  auto& r = p.lp.add_row(-kInf, 0);  // q - 4 z <= 0
  r.add(q, 1);
  r.add(z, -4);
  p.int_vars = {z};
  MipSolution s = solve_mip(p);
  REQUIRE(s.status == MipStatus::kOptimal);
  CHECK(s.obj == doctest::Approx(-7.0));  // z=1, q=4
}

TEST_CASE("random binary MIPs vs enumeration") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dc(-3, 3);
  std::uniform_int_distribution<int> dk(2, 5), dm(1, 4), dnc(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    MipProblem p;
    int k = dk(rng), nc = dnc(rng), m = dm(rng);
    for (int j = 0; j < k; ++j) p.lp.add_var(0, 1, dc(rng));
    for (int j = 0; j < nc; ++j) p.lp.add_var(-1, 2, dc(rng));
    for (int j = 0; j < k; ++j) p.int_vars.push_back(j);
    for (int i = 0; i < m; ++i) {
      double b = dc(rng);
      auto& r = (trial % 4 == 0) ? p.lp.add_row(b, b) : p.lp.add_row(-kInf, b + 1.0);
      for (int j = 0; j < k + nc; ++j) {
        double a = dc(rng);
        if (std::abs(a) > 0.5) r.add(j, a);
      }
    }
    MipOracle o = enumerate_mip(p);
    MipSolution s = solve_mip(p);
    if (!o.feasible) {
      CHECK(s.status == MipStatus::kInfeasible);
      continue;
    }
    REQUIRE(s.status == MipStatus::kOptimal);
    CHECK(s.obj == doctest::Approx(o.obj).epsilon(1e-6));
    // returned point is integral
    for (int j : p.int_vars)
      CHECK(std::abs(s.x[j] - std::round(s.x[j])) < 1e-6);
  }
}

TEST_CASE("warm incumbent is used and result unchanged") {
  MipProblem p;
  for (int j = 0; j < 6; ++j) p.lp.add_var(0, 1, -(j + 1.0));
  auto& r = p.lp.add_row(-kInf, 3);
  for (int j = 0; j < 6; ++j) r.add(j, 1);
  for (int j = 0; j < 6; ++j) p.int_vars.push_back(j);
  Eigen::VectorXd start(6);
  start << 0, 0, 0, 1, 1, 1;  // feasible: obj -15, also the optimum
  MipSolution s = solve_mip(p, {}, &start);
  REQUIRE(s.status == MipStatus::kOptimal);
  CHECK(s.obj == doctest::Approx(-15.0));
}

TEST_CASE("branching priorities accepted") {
  MipProblem p;
  for (int j = 0; j < 4; ++j) p.lp.add_var(0, 1, -1);
  auto& r = p.lp.add_row(-kInf, 2.5);
  for (int j = 0; j < 4; ++j) r.add(j, 1);
  for (int j = 0; j < 4; ++j) p.int_vars.push_back(j);
  p.priority = {5, 1, 1, 1};
  MipSolution s = solve_mip(p);
  REQUIRE(s.status == MipStatus::kOptimal);
  CHECK(s.obj == doctest::Approx(-2.0));
}
