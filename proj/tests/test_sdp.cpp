#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "nodalbid/sdp/relax.hpp"

using namespace nodalbid;
using namespace nodalbid::sdp;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testutil::small_strategic_case;

namespace {

qcqp::QcqpForm bare_form(int n) {
  qcqp::QcqpForm q;
  q.layout.n = n;
  q.F = MatrixXd::Zero(n, n);
  q.f = VectorXd::Zero(n);
  return q;
}

}  // namespace

TEST_CASE("unconstrained concave quadratic: exact bound") {
  // max x^T F x + 2 f^T x with F negative definite has optimum -f^T F^{-1} f
  auto q = bare_form(3);
  q.F << -2, 0.3, 0, 0.3, -1.5, 0.2, 0, 0.2, -3;
  q.f << 1, -0.5, 0.25;
  double opt = -q.f.dot(q.F.ldlt().solve(q.f));
  auto full = solve_certificate(build_full_sdp(q));
  REQUIRE(full.status == opt::ConicStatus::kOptimal);
  CHECK(full.Lambda == doctest::Approx(opt).epsilon(1e-6));

  auto rf = qcqp::reduce(q);
  CHECK(rf.r == 3);
  auto red = solve_certificate(build_reduced_sdp(rf));
  REQUIRE(red.status == opt::ConicStatus::kOptimal);
  CHECK(red.Lambda == doctest::Approx(opt).epsilon(1e-6));
  auto mom = solve_moment(build_moment_sdp(rf));
  REQUIRE(mom.status == opt::ConicStatus::kOptimal);
  CHECK(mom.objective == doctest::Approx(opt).epsilon(1e-6));
}

TEST_CASE("certificates handle equalities and complementarities exactly") {
  // max x*y subject to x + y = 3, x >= 0, y >= 0 and the complementarity
  // x*y = 0, which forces the optimum to zero
  auto q = bare_form(2);
  q.F << 0, 0.5, 0.5, 0;
  VectorXd ex = VectorXd::Unit(2, 0), ey = VectorXd::Unit(2, 1);
  VectorXd ones = VectorXd::Ones(2);
  q.eqs.push_back({ones, -3.0});
  q.ineqs.push_back({ex, 0.0});
  q.ineqs.push_back({ey, 0.0});
  q.comps.push_back({ex, 0.0, ey, 0.0});

  auto full = solve_certificate(build_full_sdp(q));
  REQUIRE(full.status == opt::ConicStatus::kOptimal);
  CHECK(std::abs(full.Lambda) < 1e-5);
  auto rf = qcqp::reduce(q);
  CHECK(rf.r == 1);
  auto red = solve_certificate(build_reduced_sdp(rf));
  REQUIRE(red.status == opt::ConicStatus::kOptimal);
  CHECK(std::abs(red.Lambda) < 1e-5);
  auto mom = solve_moment(build_moment_sdp(rf));
  REQUIRE(mom.status == opt::ConicStatus::kOptimal);
  CHECK(std::abs(mom.objective) < 1e-5);
}

TEST_CASE("moment bound and certificate are a weak-duality pair on the 3-bus case") {
  // the bound pair straddles a degenerate optimal face here, so the moment
  // side is trusted for the value and the certificate is held to weak
  // duality plus a coarse proximity band
  auto c = small_strategic_case();
  auto rf = qcqp::reduce(qcqp::assemble_qcqp(c));
  auto mom = solve_moment(build_moment_sdp(rf));
  REQUIRE(mom.status == opt::ConicStatus::kOptimal);
  auto red = solve_certificate(build_reduced_sdp(rf));
  REQUIRE(red.status != opt::ConicStatus::kPrimalInfeasible);
  REQUIRE(red.status != opt::ConicStatus::kDualInfeasible);
  double scale = std::max(1.0, std::abs(mom.objective));
  CHECK(red.Lambda >= mom.objective - 1e-3 * scale);
  CHECK(red.Lambda <= mom.objective + 0.05 * scale);
}

TEST_CASE("relaxation upper-bounds every feasible stacked point") {
  auto c = small_strategic_case();
  auto q = qcqp::assemble_qcqp(c);
  auto rf = qcqp::reduce(q);
  auto mom = solve_moment(build_moment_sdp(rf));
  REQUIRE(mom.status == opt::ConicStatus::kOptimal);
  double best = -1e30;
  for (double bid = 10; bid <= 45; bid += 2.5) {
    auto sol = market::solve_dispatch(c, VectorXd::Constant(1, bid));
    VectorXd x = q.layout.stack(c, VectorXd::Constant(1, bid), sol);
    REQUIRE(q.residual(x) < 1e-6);
    best = std::max(best, q.objective(x));
    CHECK(mom.objective >= q.objective(x) - 1e-6 * std::max(1.0, std::abs(q.objective(x))));
  }
  CHECK(best > 0);  // the strategic unit can profit
}

TEST_CASE("fully pinned instance is exact and rank one") {
  // equalities fix x = (1, 2); objective value is then forced
  auto q = bare_form(2);
  q.F << 1, 0, 0, -1;
  q.f << 0.5, 0;
  VectorXd e0 = VectorXd::Unit(2, 0), e1 = VectorXd::Unit(2, 1);
  q.eqs.push_back({e0, -1.0});
  q.eqs.push_back({e1, -2.0});
  auto rf = qcqp::reduce(q);
  CHECK(rf.r == 0);
  auto mom = solve_moment(build_moment_sdp(rf));
  REQUIRE(mom.status == opt::ConicStatus::kOptimal);
  VectorXd x0(2);
  x0 << 1, 2;
  CHECK(mom.objective == doctest::Approx(q.objective(x0)).epsilon(1e-6));
  CHECK(mom.rank_ratio[0] < 1e-6);
  VectorXd x = rf.lift(mom.y[0]);
  CHECK((x - x0).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("bid-pinned market instance solves with small gap to the LP point") {
  auto c = small_strategic_case();
  VectorXd bids = VectorXd::Constant(1, 30.0);
  auto q = qcqp::assemble_qcqp(c, &bids);
  auto rf = qcqp::reduce(q);
  auto mom = solve_moment(build_moment_sdp(rf));
  REQUIRE(mom.status == opt::ConicStatus::kOptimal);
  auto sol = market::solve_dispatch(c, bids);
  double ref = market::strategic_profit(c, sol);
  CHECK(mom.objective >= ref - 1e-6 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("infeasible block is certified through the relaxation") {
  // x >= 1 and -x >= 0 cannot hold
  auto q = bare_form(1);
  q.ineqs.push_back({VectorXd::Constant(1, 1.0), -1.0});
  q.ineqs.push_back({VectorXd::Constant(1, -1.0), 0.0});
  auto rf = qcqp::reduce(q);
  auto mom = solve_moment(build_moment_sdp(rf));
  CHECK(mom.status != opt::ConicStatus::kOptimal);
}

TEST_CASE("candidate extraction and rank") {
  VectorXd y(3);
  y << 0.5, -1, 2;
  VectorXd v(4);
  v << 1, y[0], y[1], y[2];
  MatrixXd Y = v * v.transpose();
  CHECK((extract_candidate(Y) - y).norm() < 1e-12);
  CHECK(numeric_rank(Y) == 1);
  MatrixXd bad = 0.5 * Y;
  CHECK_THROWS_AS(extract_candidate(bad), std::runtime_error);
  CHECK(numeric_rank(MatrixXd::Identity(3, 3)) == 3);
  Eigen::Vector2d d(1.0, 1e-9);
  CHECK(numeric_rank(d.asDiagonal().toDenseMatrix()) == 1);
}

TEST_CASE("multi-block: T=K=1 reduces to the single moment problem") {
  auto c = small_strategic_case();
  c.horizon = 1;
  c.scenarios = {1.0};
  auto multi = qcqp::assemble_multi(c);
  auto single = build_moment_sdp(qcqp::reduce(qcqp::assemble_qcqp(c)));
  auto msdp = build_multi_sdp(multi);
  CHECK(msdp.blocks == 1);
  CHECK(msdp.dim == single.dim);
  auto a = solve_moment(msdp);
  auto b = solve_moment(single);
  REQUIRE(a.status == opt::ConicStatus::kOptimal);
  REQUIRE(b.status == opt::ConicStatus::kOptimal);
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-6));
}

TEST_CASE("multi-block scalar counts and duplicate-scenario invariance") {
  auto c = small_strategic_case();
  c.horizon = 2;
  c.scenarios = {1.0};
  auto m1 = build_multi_sdp(qcqp::assemble_multi(c));
  int r = m1.dim - 1;
  CHECK(m1.blocks == 2);
  // matrix-variable scalar count per block is (r+1)(r+2)/2; total linear in T*K
  CHECK(m1.blocks * (r + 1) * (r + 2) / 2 == 2 * (r + 1) * (r + 2) / 2);
  auto s1 = solve_moment(m1);
  REQUIRE(s1.status == opt::ConicStatus::kOptimal);

  c.scenarios = {1.0, 1.0};
  auto m2 = build_multi_sdp(qcqp::assemble_multi(c));
  CHECK(m2.blocks == 4);
  auto s2 = solve_moment(m2);
  REQUIRE(s2.status == opt::ConicStatus::kOptimal);
  CHECK(s2.objective == doctest::Approx(s1.objective).epsilon(1e-4));
}

TEST_CASE("ramp coupling tightens the multi-slot bound") {
  auto c = small_strategic_case();
  c.horizon = 2;
  c.scenarios = {1.0};
  auto multi = qcqp::assemble_multi(c);
  auto with_ramp = solve_moment(build_multi_sdp(multi));
  REQUIRE(with_ramp.status == opt::ConicStatus::kOptimal);
  // dropping the couplings can only loosen the bound
  auto loose = multi;
  loose.couplings.clear();
  auto without = solve_moment(build_multi_sdp(loose));
  REQUIRE(without.status == opt::ConicStatus::kOptimal);
  CHECK(with_ramp.objective <= without.objective + 1e-6 * std::abs(without.objective) + 1e-6);
}
