#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "nodalbid/market/dispatch.hpp"
#include "nodalbid/recovery/recovery.hpp"

using namespace nodalbid;
using namespace nodalbid::recovery;
using Eigen::VectorXd;
using testutil::small_strategic_case;

namespace {

// candidate vectors lifted from a concrete dispatch optimum
std::vector<VectorXd> dispatch_candidate(const qcqp::MultiQcqp& multi, double bid) {
  VectorXd bids = VectorXd::Constant(multi.layout().S, bid);
  auto sol = market::solve_dispatch(multi.c, bids);
  VectorXd x = multi.layout().stack(multi.c, bids, sol);
  return std::vector<VectorXd>(multi.blocks.size(), x);
}

sdp::MomentSolution fake_moment(const qcqp::MultiQcqp& multi,
                                const std::vector<VectorXd>& x) {
  sdp::MomentSolution m;
  m.status = opt::ConicStatus::kOptimal;
  for (size_t b = 0; b < multi.blocks.size(); ++b)
    m.y.push_back(multi.blocks[b].project(x[b]));
  return m;
}

}  // namespace

TEST_CASE("classification matches the threshold rules") {
  auto multi = qcqp::assemble_multi(small_strategic_case());
  auto x = dispatch_candidate(multi, 30.0);
  const double eps = 0.1, delta = 1.0;
  auto cls = classify(multi, x, eps, delta);
  CHECK(cls.eps == eps);
  REQUIRE(cls.pairs.size() == multi.blocks.size());
  int fixed = 0;
  for (size_t b = 0; b < multi.blocks.size(); ++b) {
    REQUIRE(cls.pairs[b].size() == multi.blocks[b].parent.comps.size());
    for (size_t z = 0; z < cls.pairs[b].size(); ++z) {
      const auto& cp = multi.blocks[b].parent.comps[z];
      const auto& pm = cls.pairs[b][z];
      CHECK(pm.dual_mag == doctest::Approx(std::abs(cp.u.dot(x[b]) + cp.u0)));
      CHECK(pm.slack_mag == doctest::Approx(std::abs(cp.w.dot(x[b]) + cp.w0)));
      milp::PairFix want = milp::PairFix::kKeepBinary;
      if (pm.slack_mag <= eps && pm.dual_mag >= delta)
        want = milp::PairFix::kFixPrimalSlack;
      else if (pm.dual_mag <= eps && pm.slack_mag >= delta)
        want = milp::PairFix::kFixDualFactor;
      CHECK(pm.decision == want);
      if (want != milp::PairFix::kKeepBinary) ++fixed;
    }
  }
  CHECK(fixed > 0);  // a dispatch vertex decisively separates most pairs

  CHECK_THROWS_AS(classify(multi, x, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(classify(multi, x, 0.5, 0.5), std::invalid_argument);
  std::vector<VectorXd> wrong;
  CHECK_THROWS_AS(classify(multi, wrong, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("keep-binary set grows as eps shrinks") {
  auto multi = qcqp::assemble_multi(small_strategic_case());
  auto x = dispatch_candidate(multi, 30.0);
  auto fixed_set = [&](double eps) {
    std::vector<int> out;
    auto cls = classify(multi, x, eps, 1.0);
    for (size_t b = 0; b < cls.pairs.size(); ++b)
      for (size_t z = 0; z < cls.pairs[b].size(); ++z)
        if (cls.pairs[b][z].decision != milp::PairFix::kKeepBinary)
          out.push_back(static_cast<int>(b * cls.pairs[b].size() + z));
    return out;
  };
  auto prev = fixed_set(0.1);
  for (double eps : {0.05, 0.02, 0.01, 0.001}) {
    auto cur = fixed_set(eps);
    for (int id : cur)  // every pair still fixed was fixed before
      CHECK(std::find(prev.begin(), prev.end(), id) != prev.end());
    prev = cur;
  }
}

TEST_CASE("a feasible candidate exits before any reformulation solve") {
  auto multi = qcqp::assemble_multi(small_strategic_case());
  auto x = dispatch_candidate(multi, 30.0);
  REQUIRE(multi.blocks[0].parent.residual(x[0]) < 1e-6);
  auto rep = algorithm1(multi, fake_moment(multi, x));
  CHECK(rep.early_exit);
  CHECK(rep.iterations.empty());
  CHECK(rep.residual < 1e-6);
  CHECK(rep.profit == doctest::Approx(multi.objective(x)).epsilon(1e-9));
  REQUIRE(rep.x.size() == x.size());
  CHECK((rep.x[0] - x[0]).lpNorm<Eigen::Infinity>() < 1e-6);

  sdp::MomentSolution bad;
  CHECK_THROWS_AS(algorithm1(multi, bad), std::invalid_argument);
}

TEST_CASE("three-bus recovery is near-optimal, feasible, and deterministic") {
  auto multi = qcqp::assemble_multi(small_strategic_case());
  auto base = milp::solve_milp(milp::build_milp(multi));
  REQUIRE(base.status == opt::MipStatus::kOptimal);

  auto rep = recover(multi);
  CHECK(rep.residual < 1e-6);
  CHECK(rep.profit >= 0.96 * base.profit - 1e-9);
  CHECK(rep.profit <= base.profit + 1e-6);

  auto rep2 = recover(multi);
  CHECK(rep2.profit == rep.profit);
  CHECK(rep2.early_exit == rep.early_exit);
  CHECK(rep2.iterations.size() == rep.iterations.size());
}

TEST_CASE("all-keep classification reproduces the baseline optimum") {
  auto multi = qcqp::assemble_multi(small_strategic_case());
  auto base = milp::solve_milp(milp::build_milp(multi));
  REQUIRE(base.status == opt::MipStatus::kOptimal);

  // an infeasible candidate plus an unreachable activity threshold: nothing
  // is fixed, so the first iteration already solves the full reformulation
  std::vector<VectorXd> junk(multi.blocks.size(),
                             VectorXd::Zero(multi.layout().n));
  RecoveryConfig cfg;
  cfg.delta = 1e9;
  auto rep = algorithm1(multi, fake_moment(multi, junk), cfg);
  CHECK(!rep.early_exit);
  CHECK(!rep.used_baseline);
  REQUIRE(rep.iterations.size() == 1);
  CHECK(rep.iterations[0].kept ==
        static_cast<int>(multi.blocks.size() * multi.blocks[0].parent.comps.size()));
  CHECK(rep.iterations[0].fixed_primal == 0);
  CHECK(rep.profit == doctest::Approx(base.profit).epsilon(1e-8));
  CHECK(rep.residual < 1e-6);
}

TEST_CASE("eps exhaustion degrades to the baseline reformulation") {
  auto multi = qcqp::assemble_multi(small_strategic_case());
  auto base = milp::solve_milp(milp::build_milp(multi));
  std::vector<VectorXd> junk(multi.blocks.size(),
                             VectorXd::Zero(multi.layout().n));
  RecoveryConfig cfg;
  cfg.eps0 = 0.0;  // skip every restricted attempt
  auto rep = algorithm1(multi, fake_moment(multi, junk), cfg);
  CHECK(rep.used_baseline);
  CHECK(rep.profit == doctest::Approx(base.profit).epsilon(1e-8));
  CHECK(rep.residual < 1e-6);
}

TEST_CASE("report serialization carries the trace") {
  auto multi = qcqp::assemble_multi(small_strategic_case());
  auto rep = recover(multi);
  std::ostringstream os;
  rep.write(os);
  std::string s = os.str();
  CHECK(s.find("profit:") != std::string::npos);
  CHECK(s.find("residual:") != std::string::npos);
  CHECK(s.find("early_exit:") != std::string::npos);
  CHECK(s.find("iterations:") != std::string::npos);
}
