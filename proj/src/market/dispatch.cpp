#include "nodalbid/market/dispatch.hpp"

#include <algorithm>
#include <stdexcept>

namespace nodalbid::market {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Susceptance-weighted Laplacian A V^{-1} A^T (|N| x |N|).
MatrixXd bus_matrix(const MarketCase& c) {
  MatrixXd B = MatrixXd::Zero(c.num_buses, c.num_buses);
  for (const auto& ln : c.lines) {
    double y = 1.0 / ln.reactance;
    int f = ln.from - 1, t = ln.to - 1;
    B(f, f) += y;
    B(t, t) += y;
    B(f, t) -= y;
    B(t, f) -= y;
  }
  return B;
}

double check_scenario(const MarketCase& c, int scenario) {
  if (scenario < 1 || scenario > static_cast<int>(c.scenarios.size()))
    throw std::invalid_argument("scenario index out of range");
  return c.scenarios[scenario - 1];
}

}  // namespace

SlotParams slot_params(const MarketCase& c, const VectorXd& strategic_bids,
                       int slot, int scenario) {
  double f = check_scenario(c, scenario);
  if (slot < 1 || slot > c.horizon) throw std::invalid_argument("slot index out of range");
  SlotParams p;
  p.a.resize(c.generators.size());
  p.b.resize(c.loads.size());
  int s = 0;
  for (size_t g = 0; g < c.generators.size(); ++g) {
    if (c.generators[g].strategic) {
      if (s >= strategic_bids.size())
        throw std::invalid_argument("strategic bid vector too short");
      p.a[g] = strategic_bids[s++];
    } else {
      p.a[g] = f * c.generators[g].bid;
    }
  }
  if (s != strategic_bids.size())
    throw std::invalid_argument("strategic bid vector length mismatch");
  for (size_t d = 0; d < c.loads.size(); ++d)
    p.b[d] = f * c.load_bid(static_cast<int>(d), slot);
  return p;
}

opt::LinearProgram build_dispatch_lp(const MarketCase& c, const VectorXd& strategic_bids,
                                     int slot, int scenario) {
  SlotParams sp = slot_params(c, strategic_bids, slot, scenario);
  const int G = static_cast<int>(c.generators.size());
  const int D = static_cast<int>(c.loads.size());
  const int N = c.num_buses;

  opt::LinearProgram lp;
  for (int g = 0; g < G; ++g)
    lp.add_var(c.generators[g].p_min, c.generators[g].p_max, sp.a[g]);
  for (int d = 0; d < D; ++d) lp.add_var(c.loads[d].p_min, c.loads[d].p_max, -sp.b[d]);
  for (int n = 0; n < N; ++n) lp.add_var(-opt::kInf, opt::kInf, 0.0);

  MatrixXd B = bus_matrix(c);
  for (int n = 0; n < N; ++n) {
    auto& row = lp.add_row(0.0, 0.0);  // nodal balance, dual = LMP
    for (int g = 0; g < G; ++g)
      if (c.generators[g].bus - 1 == n) row.add(g, 1.0);
    for (int d = 0; d < D; ++d)
      if (c.loads[d].bus - 1 == n) row.add(G + d, -1.0);
    for (int m = 0; m < N; ++m) row.add(G + D + m, -B(n, m));
  }
  // reference angle pin; its dual is identically zero
  lp.add_row(0.0, 0.0).add(G + D, 1.0);
  for (int l : c.finite_line_idx()) {
    const auto& ln = c.lines[l];
    auto& row = lp.add_row(-ln.capacity, ln.capacity);
    row.add(G + D + ln.from - 1, 1.0 / ln.reactance);
    row.add(G + D + ln.to - 1, -1.0 / ln.reactance);
  }
  return lp;
}

DispatchSolution solve_dispatch(const MarketCase& c, const VectorXd& strategic_bids,
                                int slot, int scenario) {
  opt::LinearProgram lp = build_dispatch_lp(c, strategic_bids, slot, scenario);
  opt::LpSolution s = opt::solve_lp(lp);
  if (s.status == opt::LpStatus::kInfeasible)
    throw std::runtime_error("infeasible dispatch: market clearing has no solution");
  if (s.status != opt::LpStatus::kOptimal)
    throw std::runtime_error("dispatch solver failure");

  const int G = static_cast<int>(c.generators.size());
  const int D = static_cast<int>(c.loads.size());
  const int N = c.num_buses;
  DispatchSolution out;
  out.P_G = s.x.segment(0, G);
  out.P_D = s.x.segment(G, D);
  out.theta = s.x.segment(G + D, N);
  out.lambda = s.row_dual.segment(0, N);
  out.sigma.resize(G);
  out.delta.resize(G);
  for (int g = 0; g < G; ++g) {
    out.sigma[g] = std::max(s.red_cost[g], 0.0);
    out.delta[g] = std::max(-s.red_cost[g], 0.0);
  }
  out.zeta.resize(D);
  out.xi.resize(D);
  for (int d = 0; d < D; ++d) {
    out.zeta[d] = std::max(s.red_cost[G + d], 0.0);
    out.xi[d] = std::max(-s.red_cost[G + d], 0.0);
  }
  auto fl = c.finite_line_idx();
  out.phi.resize(fl.size());
  out.psi.resize(fl.size());
  for (size_t i = 0; i < fl.size(); ++i) {
    double y = s.row_dual[N + 1 + static_cast<int>(i)];
    out.phi[i] = std::max(y, 0.0);   // lower flow bound −C binding
    out.psi[i] = std::max(-y, 0.0);  // upper flow bound +C binding
  }
  out.objective = s.obj;
  return out;
}

double KktReport::max() const {
  return std::max({stationarity, complementarity, feasibility, sign});
}

KktReport kkt_residuals(const MarketCase& c, const VectorXd& strategic_bids,
                        const DispatchSolution& sol, int slot, int scenario) {
  SlotParams sp = slot_params(c, strategic_bids, slot, scenario);
  const int G = static_cast<int>(c.generators.size());
  const int D = static_cast<int>(c.loads.size());
  const int N = c.num_buses;
  const int L = static_cast<int>(c.lines.size());
  auto fl = c.finite_line_idx();

  KktReport r;
  auto bump = [](double& acc, double v) { acc = std::max(acc, std::abs(v)); };

  // stationarity in P_G and P_D
  for (int g = 0; g < G; ++g)
    bump(r.stationarity,
         sp.a[g] - sol.lambda[c.generators[g].bus - 1] - sol.sigma[g] + sol.delta[g]);
  for (int d = 0; d < D; ++d)
    bump(r.stationarity,
         sp.b[d] - sol.lambda[c.loads[d].bus - 1] + sol.zeta[d] - sol.xi[d]);

  // stationarity in theta: A V^{-1} (A^T lambda + psi - phi) = 0, with the
  // capacity duals present only on bounded lines
  VectorXd line_term(L);
  for (int l = 0; l < L; ++l) {
    const auto& ln = c.lines[l];
    line_term[l] = sol.lambda[ln.from - 1] - sol.lambda[ln.to - 1];
  }
  for (size_t i = 0; i < fl.size(); ++i) line_term[fl[i]] += sol.psi[i] - sol.phi[i];
  VectorXd theta_stat = VectorXd::Zero(N);
  for (int l = 0; l < L; ++l) {
    const auto& ln = c.lines[l];
    double v = line_term[l] / ln.reactance;
    theta_stat[ln.from - 1] += v;
    theta_stat[ln.to - 1] -= v;
  }
  bump(r.stationarity, theta_stat.lpNorm<Eigen::Infinity>());

  // line flows
  VectorXd flow(L);
  for (int l = 0; l < L; ++l) {
    const auto& ln = c.lines[l];
    flow[l] = (sol.theta[ln.from - 1] - sol.theta[ln.to - 1]) / ln.reactance;
  }

  // complementarity families
  for (int g = 0; g < G; ++g) {
    bump(r.complementarity, sol.sigma[g] * (sol.P_G[g] - c.generators[g].p_min));
    bump(r.complementarity, sol.delta[g] * (c.generators[g].p_max - sol.P_G[g]));
  }
  for (int d = 0; d < D; ++d) {
    bump(r.complementarity, sol.zeta[d] * (sol.P_D[d] - c.loads[d].p_min));
    bump(r.complementarity, sol.xi[d] * (c.loads[d].p_max - sol.P_D[d]));
  }
  for (size_t i = 0; i < fl.size(); ++i) {
    double cap = c.lines[fl[i]].capacity;
    bump(r.complementarity, sol.phi[i] * (flow[fl[i]] + cap));
    bump(r.complementarity, sol.psi[i] * (cap - flow[fl[i]]));
  }

  // primal feasibility: balance, boxes, flow limits, angle pin
  VectorXd inj = VectorXd::Zero(N);
  for (int g = 0; g < G; ++g) inj[c.generators[g].bus - 1] += sol.P_G[g];
  for (int d = 0; d < D; ++d) inj[c.loads[d].bus - 1] -= sol.P_D[d];
  for (int l = 0; l < L; ++l) {
    const auto& ln = c.lines[l];
    inj[ln.from - 1] -= flow[l];
    inj[ln.to - 1] += flow[l];
  }
  bump(r.feasibility, inj.lpNorm<Eigen::Infinity>());
  for (int g = 0; g < G; ++g) {
    bump(r.feasibility, std::max(c.generators[g].p_min - sol.P_G[g], 0.0));
    bump(r.feasibility, std::max(sol.P_G[g] - c.generators[g].p_max, 0.0));
  }
  for (int d = 0; d < D; ++d) {
    bump(r.feasibility, std::max(c.loads[d].p_min - sol.P_D[d], 0.0));
    bump(r.feasibility, std::max(sol.P_D[d] - c.loads[d].p_max, 0.0));
  }
  for (int l : fl) bump(r.feasibility, std::max(std::abs(flow[l]) - c.lines[l].capacity, 0.0));
  bump(r.feasibility, sol.theta[0]);

  // dual sign conditions
  auto neg = [&](const VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) bump(r.sign, std::max(-v[i], 0.0));
  };
  neg(sol.sigma);
  neg(sol.delta);
  neg(sol.zeta);
  neg(sol.xi);
  neg(sol.phi);
  neg(sol.psi);
  return r;
}

double strategic_profit(const MarketCase& c, const DispatchSolution& sol) {
  double p = 0.0;
  for (size_t g = 0; g < c.generators.size(); ++g)
    if (c.generators[g].strategic)
      p += (sol.lambda[c.generators[g].bus - 1] - c.generators[g].cost) * sol.P_G[g];
  return p;
}

double compute_optimality(double candidate_profit, double reference_profit) {
  if (!(reference_profit > 0))
    throw std::invalid_argument("optimality ratio undefined: reference profit <= 0");
  return candidate_profit / reference_profit;
}

}  // namespace nodalbid::market
