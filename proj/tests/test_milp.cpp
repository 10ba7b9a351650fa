#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "nodalbid/market/dispatch.hpp"
#include "nodalbid/milp/milp.hpp"
#include "nodalbid/sdp/relax.hpp"

using namespace nodalbid;
using namespace nodalbid::milp;
using Eigen::VectorXd;
using testutil::small_strategic_case;

namespace {

// exhaustive single-unit bid grid, the definitional oracle
double grid_oracle(const market::MarketCase& c, double lo, double hi, double step) {
  double best = -1e30;
  for (double bid = lo; bid <= hi + 1e-12; bid += step) {
    auto sol = market::solve_dispatch(c, VectorXd::Constant(1, bid));
    best = std::max(best, market::strategic_profit(c, sol));
  }
  return best;
}

market::MarketCase one_bus_case() {
  market::MarketCase c;
  c.num_buses = 1;
  market::Generator gs;
  gs.bus = 1;
  gs.p_max = 2;
  gs.strategic = true;
  gs.cost = 10;
  c.generators.push_back(gs);
  market::Generator gc;
  gc.bus = 1;
  gc.p_max = 3;
  gc.bid = 50;
  c.generators.push_back(gc);
  market::Load d;
  d.bus = 1;
  d.p_max = 4;
  d.bid = {60};
  c.loads.push_back(d);
  c.validate();
  return c;
}

// branch pattern of a dispatch optimum: 1 when the dual factor is active
Classification classify_from_point(const qcqp::MultiQcqp& multi, const VectorXd& x,
                                   double tol = 1e-7) {
  Classification cls(multi.blocks.size());
  for (size_t b = 0; b < multi.blocks.size(); ++b) {
    for (const auto& cp : multi.blocks[b].parent.comps)
      cls[b].push_back(cp.u.dot(x) + cp.u0 > tol ? PairFix::kFixPrimalSlack
                                                 : PairFix::kFixDualFactor);
  }
  return cls;
}

}  // namespace

TEST_CASE("strong-duality linearization holds at dispatch optima") {
  std::mt19937 rng(20240811);
  int checked = 0;
  for (int it = 0; it < 100; ++it) {
    auto inst = testutil::make_random_case(rng);
    market::DispatchSolution sol;
    try {
      sol = market::solve_dispatch(inst.c, inst.strategic_bids);
    } catch (const std::runtime_error&) {
      continue;  // infeasible random draw
    }
    CHECK(verify_linearization(inst.c, sol, inst.strategic_bids) < 1e-6);
    ++checked;
  }
  CHECK(checked > 50);

  // the identity is a KKT property, not an algebraic one
  auto c = small_strategic_case();
  VectorXd bids = VectorXd::Constant(1, 30.0);
  auto sol = market::solve_dispatch(c, bids);
  sol.delta[1] += 0.25;  // non-strategic upper dual
  CHECK(verify_linearization(c, sol, bids) > 1e-6);
}

TEST_CASE("one-bus toy equals the bid-grid oracle") {
  auto c = one_bus_case();
  double oracle = grid_oracle(c, 0.0, 80.0, 0.01);
  auto m = build_milp(qcqp::assemble_multi(c));
  auto r = solve_milp(m);
  REQUIRE(r.status == opt::MipStatus::kOptimal);
  // grid resolution times the strategic capacity bounds the discretization
  CHECK(r.profit >= oracle - 1e-6);
  CHECK(r.profit <= oracle + 0.01 * 2 + 1e-6);
}

TEST_CASE("three-bus baseline matches the oracle and respects the relaxation bound") {
  auto c = small_strategic_case();
  double oracle = grid_oracle(c, 0.0, 80.0, 0.01);
  auto multi = qcqp::assemble_multi(c);
  auto m = build_milp(multi);
  auto r = solve_milp(m);
  REQUIRE(r.status == opt::MipStatus::kOptimal);
  CHECK(r.profit >= oracle - 1e-6);
  CHECK(r.profit <= oracle + 0.01 * 4 + 1e-6);

  // every incumbent satisfies the full QCQP including complementarities
  REQUIRE(r.x.size() == 1);
  CHECK(multi.blocks[0].parent.residual(r.x[0]) < 1e-6);

  auto mom = sdp::solve_moment(sdp::build_moment_sdp(multi.blocks[0]));
  REQUIRE(mom.status == opt::ConicStatus::kOptimal);
  CHECK(r.profit <= mom.objective + 1e-4 * std::max(1.0, std::abs(mom.objective)));

  CHECK(r.tight.empty());  // default big-M never binds here
}

TEST_CASE("binaries fixed to a dispatch pattern reproduce its profit") {
  auto c = small_strategic_case();
  VectorXd bids = VectorXd::Constant(1, 30.0);
  auto sol = market::solve_dispatch(c, bids);
  double ref = market::strategic_profit(c, sol);
  auto multi = qcqp::assemble_multi(c, &bids);
  auto m = build_milp(multi);
  VectorXd x = multi.layout().stack(c, bids, sol);
  for (int z = 0; z < m.Z; ++z) {
    const auto& cp = m.pairs[z];
    double beta = cp.u.dot(x) + cp.u0 > 1e-7 ? 1.0 : 0.0;
    int col = m.binary_of[z];
    m.mip.lp.lb[col] = beta;
    m.mip.lp.ub[col] = beta;
  }
  auto r = solve_milp(m);
  REQUIRE(r.status == opt::MipStatus::kOptimal);
  CHECK(r.profit == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("consistent fixing yields a pure LP with the dispatch profit") {
  auto c = small_strategic_case();
  VectorXd bids = VectorXd::Constant(1, 30.0);
  auto sol = market::solve_dispatch(c, bids);
  double ref = market::strategic_profit(c, sol);
  auto multi = qcqp::assemble_multi(c, &bids);
  VectorXd x = multi.layout().stack(c, bids, sol);
  auto m = build_augmented_milp(multi, classify_from_point(multi, x));
  CHECK(m.mip.int_vars.empty());
  auto r = solve_milp(m);
  REQUIRE(r.status == opt::MipStatus::kOptimal);
  CHECK(r.profit == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("all-keep classification reproduces the baseline") {
  auto c = small_strategic_case();
  auto multi = qcqp::assemble_multi(c);
  auto base = build_milp(multi);
  Classification keep(1, std::vector<PairFix>(base.Z, PairFix::kKeepBinary));
  auto aug = build_augmented_milp(multi, keep);
  CHECK(aug.mip.lp.num_vars == base.mip.lp.num_vars);
  CHECK(aug.mip.lp.rows.size() == base.mip.lp.rows.size());
  CHECK(aug.mip.int_vars == base.mip.int_vars);
  auto ra = solve_milp(aug);
  auto rb = solve_milp(base);
  REQUIRE(ra.status == opt::MipStatus::kOptimal);
  REQUIRE(rb.status == opt::MipStatus::kOptimal);
  CHECK(ra.profit == doctest::Approx(rb.profit).epsilon(1e-8));
}

TEST_CASE("fixing restricts the feasible set monotonically") {
  auto c = small_strategic_case();
  VectorXd bids = VectorXd::Constant(1, 30.0);
  auto sol = market::solve_dispatch(c, bids);
  auto multi = qcqp::assemble_multi(c);  // bids free
  VectorXd x = multi.layout().stack(c, bids, sol);
  auto aug = build_augmented_milp(multi, classify_from_point(multi, x));
  auto base = build_milp(multi);
  auto ra = solve_milp(aug);
  auto rb = solve_milp(base);
  REQUIRE(rb.status == opt::MipStatus::kOptimal);
  REQUIRE(ra.status == opt::MipStatus::kOptimal);
  CHECK(ra.profit <= rb.profit + 1e-6);
}

TEST_CASE("contradictory fixing is infeasible") {
  auto c = small_strategic_case();
  auto multi = qcqp::assemble_multi(c);
  const auto& L = multi.layout();
  Classification cls(1, std::vector<PairFix>(
                            multi.blocks[0].parent.comps.size(), PairFix::kKeepBinary));
  // pin the strategic unit to both its bounds at once (p_min = 0 < p_max)
  cls[0][0] = PairFix::kFixPrimalSlack;        // sigma pair: P = p_min
  cls[0][L.G] = PairFix::kFixPrimalSlack;      // delta pair: P = p_max
  auto r = solve_milp(build_augmented_milp(multi, cls));
  CHECK(r.status == opt::MipStatus::kInfeasible);
}

TEST_CASE("zero-capacity strategic fleet earns zero") {
  auto c = small_strategic_case();
  c.generators[0].p_max = 0.0;
  auto r = solve_milp(build_milp(qcqp::assemble_multi(c)));
  REQUIRE(r.status == opt::MipStatus::kOptimal);
  CHECK(std::abs(r.profit) < 1e-7);
}

TEST_CASE("big-M validation and tightness diagnostics") {
  auto c = small_strategic_case();
  BigMConfig bad;
  bad.dual.gen = opt::kInf;
  CHECK_THROWS_AS(build_milp(qcqp::assemble_multi(c), bad), std::invalid_argument);
  BigMConfig neg;
  neg.primal.flow = -1.0;
  CHECK_THROWS_AS(build_milp(qcqp::assemble_multi(c), neg), std::invalid_argument);

  // strategic unit and load at bus 1, cheap competitor behind a congested
  // line: the congestion rent equals the nodal price spread, so capping the
  // flow-dual family caps the strategic node's price
  market::MarketCase tc;
  tc.num_buses = 2;
  market::Generator gs;
  gs.bus = 1;
  gs.p_max = 2;
  gs.strategic = true;
  gs.cost = 10;
  tc.generators.push_back(gs);
  market::Generator gc;
  gc.bus = 2;
  gc.p_max = 10;
  gc.bid = 20;
  tc.generators.push_back(gc);
  market::Load d;
  d.bus = 1;
  d.p_max = 4;
  d.bid = {60};
  tc.loads.push_back(d);
  market::Line ln;
  ln.from = 2;
  ln.to = 1;
  ln.reactance = 1.0;
  ln.capacity = 2.5;
  tc.lines.push_back(ln);
  tc.validate();

  auto full = solve_milp(build_milp(qcqp::assemble_multi(tc)));
  REQUIRE(full.status == opt::MipStatus::kOptimal);
  CHECK(full.tight.empty());
  // unrestricted: price at bus 1 rises to the load bid, rent 60 - 20 = 40
  CHECK(full.profit == doctest::Approx((60.0 - 10.0) * 1.5).epsilon(1e-6));

  BigMConfig capped;
  capped.dual.flow = 20.0;  // half the optimal congestion rent
  auto r = solve_milp(build_milp(qcqp::assemble_multi(tc), capped));
  REQUIRE(r.status == opt::MipStatus::kOptimal);
  CHECK(r.profit < full.profit - 1.0);
  REQUIRE(!r.tight.empty());
  auto multi = qcqp::assemble_multi(tc);
  const auto& L = multi.layout();
  for (const auto& tp : r.tight) CHECK(tp.pair >= 2 * L.G + 2 * L.D);
}

TEST_CASE("LP-format export") {
  auto c = small_strategic_case();
  auto m = build_milp(qcqp::assemble_multi(c));
  std::ostringstream os;
  export_lp_format(m, os);
  std::string s = os.str();
  CHECK(s.find("Minimize") != std::string::npos);
  CHECK(s.find("Subject To") != std::string::npos);
  CHECK(s.find("Binary") != std::string::npos);
  CHECK(s.find("End") != std::string::npos);
}
