#include "nodalbid/recovery/recovery.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace nodalbid::recovery {

using Eigen::VectorXd;
using milp::PairFix;

milp::Classification SlacknessClassification::decisions() const {
  milp::Classification out(pairs.size());
  for (size_t b = 0; b < pairs.size(); ++b)
    for (const auto& pm : pairs[b]) out[b].push_back(pm.decision);
  return out;
}

int SlacknessClassification::count(PairFix f) const {
  int n = 0;
  for (const auto& blk : pairs)
    for (const auto& pm : blk)
      if (pm.decision == f) ++n;
  return n;
}

SlacknessClassification classify(const qcqp::MultiQcqp& multi,
                                 const std::vector<VectorXd>& x, double eps,
                                 double delta) {
  if (!(eps > 0.0) || !(delta > eps))
    throw std::invalid_argument("classification thresholds require 0 < eps < delta");
  if (x.size() != multi.blocks.size())
    throw std::invalid_argument("one candidate vector per block required");
  SlacknessClassification cls;
  cls.eps = eps;
  cls.delta = delta;
  cls.pairs.resize(multi.blocks.size());
  for (size_t b = 0; b < multi.blocks.size(); ++b) {
    for (const auto& cp : multi.blocks[b].parent.comps) {
      PairMeasure pm;
      pm.dual_mag = std::abs(cp.u.dot(x[b]) + cp.u0);
      pm.slack_mag = std::abs(cp.w.dot(x[b]) + cp.w0);
      if (pm.slack_mag <= eps && pm.dual_mag >= delta)
        pm.decision = PairFix::kFixPrimalSlack;
      else if (pm.dual_mag <= eps && pm.slack_mag >= delta)
        pm.decision = PairFix::kFixDualFactor;
      else
        pm.decision = PairFix::kKeepBinary;
      cls.pairs[b].push_back(pm);
    }
  }
  return cls;
}

namespace {

double full_residual(const qcqp::MultiQcqp& multi, const std::vector<VectorXd>& x) {
  double r = multi.coupling_residual(x);
  for (size_t b = 0; b < multi.blocks.size(); ++b)
    r = std::max(r, multi.blocks[b].parent.residual(x[b]));
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RecoveryReport algorithm1(const qcqp::MultiQcqp& multi, const sdp::MomentSolution& moment,
                          const RecoveryConfig& cfg) {
  if (moment.y.size() != multi.blocks.size())
    throw std::invalid_argument("relaxation must supply a candidate for every block");

  RecoveryReport rep;
  rep.relaxation_bound = moment.objective;

  std::vector<VectorXd> cand;
  for (size_t b = 0; b < multi.blocks.size(); ++b)
    cand.push_back(multi.blocks[b].lift(moment.y[b]));

  double cand_res = full_residual(multi, cand);
  if (cand_res <= cfg.feas_tol) {
    rep.early_exit = true;
    rep.x = cand;
    rep.profit = multi.objective(cand);
    rep.residual = cand_res;
    return rep;
  }

  auto accept = [&](const milp::MilpResult& r, double eps,
                    const SlacknessClassification* cls) {
    RecoveryIteration it;
    it.eps = eps;
    if (cls) {
      it.fixed_primal = cls->count(PairFix::kFixPrimalSlack);
      it.fixed_dual = cls->count(PairFix::kFixDualFactor);
      it.kept = cls->count(PairFix::kKeepBinary);
    } else {
      it.kept = static_cast<int>(multi.blocks.size()) *
                static_cast<int>(multi.blocks.front().parent.comps.size());
    }
    it.status = r.status;
    bool feasible = (r.status == opt::MipStatus::kOptimal ||
                     r.status == opt::MipStatus::kFeasible) &&
                    !r.x.empty();
    double res = feasible ? full_residual(multi, r.x) : opt::kInf;
    if (feasible && res <= cfg.feas_tol) {
      it.objective = multi.objective(r.x);
      rep.iterations.push_back(it);
      rep.x = r.x;
      rep.profit = it.objective;
      rep.residual = res;
      return true;
    }
    rep.iterations.push_back(it);
    return false;
  };

  auto t0 = std::chrono::steady_clock::now();
  for (double eps = cfg.eps0; eps > 0.0; eps -= cfg.eps_step) {
    auto cls = classify(multi, cand, eps, cfg.delta);
    auto m = milp::build_augmented_milp(multi, cls.decisions(), cfg.bigm);
    auto r = milp::solve_milp(m, cfg.mip);
    if (accept(r, eps, &cls)) {
      rep.milp_seconds = seconds_since(t0);
      return rep;
    }
  }

  // eps underflowed: every restriction was infeasible, fall back to the
  // unrestricted reformulation
  rep.used_baseline = true;
  auto r = milp::solve_milp(milp::build_milp(multi, cfg.bigm), cfg.mip);
  rep.milp_seconds = seconds_since(t0);
  if (!accept(r, 0.0, nullptr))
    throw std::runtime_error(
        "recovery failed: the unrestricted reformulation found no feasible point");
  return rep;
}

RecoveryReport recover(const qcqp::MultiQcqp& multi, const RecoveryConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  auto moment = sdp::solve_moment(sdp::build_multi_sdp(multi));
  double sdp_s = seconds_since(t0);
  auto rep = algorithm1(multi, moment, cfg);
  rep.sdp_seconds = sdp_s;
  return rep;
}

void RecoveryReport::write(std::ostream& out) const {
  out << "early_exit: " << (early_exit ? 1 : 0) << "\n"
      << "used_baseline: " << (used_baseline ? 1 : 0) << "\n"
      << "profit: " << profit << "\n"
      << "residual: " << residual << "\n"
      << "relaxation_bound: " << relaxation_bound << "\n"
      << "sdp_seconds: " << sdp_seconds << "\n"
      << "milp_seconds: " << milp_seconds << "\n"
      << "iterations: " << iterations.size() << "\n";
  for (const auto& it : iterations) {
    const char* st = it.status == opt::MipStatus::kOptimal    ? "optimal"
                     : it.status == opt::MipStatus::kFeasible ? "feasible"
                     : it.status == opt::MipStatus::kTimeout  ? "timeout"
                                                              : "infeasible";
    out << "  iter eps=" << it.eps << " fixed_primal=" << it.fixed_primal
        << " fixed_dual=" << it.fixed_dual << " kept=" << it.kept << " status=" << st
        << " objective=" << it.objective << "\n";
  }
}

}  // namespace nodalbid::recovery
