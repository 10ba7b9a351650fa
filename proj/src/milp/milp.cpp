#include "nodalbid/milp/milp.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "nodalbid/market/dispatch.hpp"

namespace nodalbid::milp {

using Eigen::VectorXd;

BigMConfig BigMConfig::resolved(const market::MarketCase& c) const {
  BigMConfig r = *this;
  double cap = 0.0;
  for (const auto& g : c.generators) cap = std::max(cap, g.p_max);
  for (const auto& d : c.loads) cap = std::max(cap, d.p_max);
  for (int i : c.finite_line_idx()) cap = std::max(cap, c.lines[i].capacity);
  double bid = 0.0;
  for (const auto& g : c.generators)
    bid = std::max(bid, g.strategic ? g.cost : g.bid);
  for (const auto& d : c.loads)
    for (double b : d.bid) bid = std::max(bid, b);
  // scenario factors scale the competitive bids
  double smax = 0.0;
  for (double s : c.scenarios) smax = std::max(smax, s);
  double mp = 2.0 * cap;
  double md = 10.0 * bid * std::max(1.0, smax);
  for (double* v : {&r.primal.gen, &r.primal.dem, &r.primal.flow}) {
    if (*v == 0.0) *v = mp;
    if (!(*v > 0.0) || !std::isfinite(*v))
      throw std::invalid_argument("big-M bounds must be positive and finite");
  }
  for (double* v : {&r.dual.gen, &r.dual.dem, &r.dual.flow}) {
    if (*v == 0.0) *v = md;
    if (!(*v > 0.0) || !std::isfinite(*v))
      throw std::invalid_argument("big-M bounds must be positive and finite");
  }
  return r;
}

double MilpProblem::pair_M(int pair, bool dual_side) const {
  const BigMFamily& f = dual_side ? cfg.dual : cfg.primal;
  if (pair < 2 * G) return f.gen;
  if (pair < 2 * G + 2 * D) return f.dem;
  return f.flow;
}

std::vector<VectorXd> MilpProblem::split(const VectorXd& x) const {
  std::vector<VectorXd> out;
  for (int b = 0; b < blocks; ++b) out.push_back(x.segment(b * n, n));
  return out;
}

namespace {

// strong-duality linearization of the per-block strategic revenue minus
// cost, as objective coefficients over the stacked x (no constant term):
//   sum_S lambda_{n(g)} P_g = b^T P_D
//     + sum_{g not in S} (sigma_g p_min - delta_g p_max - a_g P_g)
//     + zeta^T p_min_D - xi^T p_max_D - (phi + psi)^T C
void add_profit_coeffs(const market::MarketCase& c, const qcqp::VariableLayout& L,
                       int slot, int scenario, double scale, int base,
                       VectorXd& obj) {
  market::SlotParams sp =
      market::slot_params(c, VectorXd::Zero(L.S), slot, scenario);
  for (int g = 0; g < L.G; ++g) {
    const auto& gen = c.generators[g];
    if (gen.strategic) {
      obj[base + L.P_G(g)] += -scale * gen.cost;
    } else {
      obj[base + L.sigma(g)] += scale * gen.p_min;
      obj[base + L.delta(g)] += -scale * gen.p_max;
      obj[base + L.P_G(g)] += -scale * sp.a[g];
    }
  }
  for (int d = 0; d < L.D; ++d) {
    const auto& load = c.loads[d];
    obj[base + L.P_D(d)] += scale * sp.b[d];
    obj[base + L.zeta(d)] += scale * load.p_min;
    obj[base + L.xi(d)] += -scale * load.p_max;
  }
  auto fl = c.finite_line_idx();
  for (size_t i = 0; i < fl.size(); ++i) {
    double cap = c.lines[fl[i]].capacity;
    obj[base + L.phi(static_cast<int>(i))] += -scale * cap;
    obj[base + L.psi(static_cast<int>(i))] += -scale * cap;
  }
}

MilpProblem build_impl(const qcqp::MultiQcqp& multi, const Classification* cls,
                       const BigMConfig& cfg_in) {
  const BigMConfig cfg = cfg_in.resolved(multi.c);
  const auto& L = multi.layout();
  const int B = static_cast<int>(multi.blocks.size());
  const int Z = static_cast<int>(multi.blocks[0].parent.comps.size());
  if (cls && (static_cast<int>(cls->size()) != B ||
              static_cast<int>(cls->front().size()) != Z))
    throw std::invalid_argument("classification must cover every pair in every block");

  MilpProblem out;
  out.n = L.n;
  out.blocks = B;
  out.Z = Z;
  out.G = L.G;
  out.D = L.D;
  out.Lf = L.Lf;
  out.cfg = cfg;
  out.binary_of.assign(static_cast<size_t>(B) * Z, -1);
  // prices and bids are only indirectly bounded by the dual families
  const double price_M =
      std::max({cfg.dual.gen, cfg.dual.dem, cfg.dual.flow});

  opt::LinearProgram& lp = out.mip.lp;
  VectorXd obj = VectorXd::Zero(static_cast<Eigen::Index>(B) * L.n);

  for (int b = 0; b < B; ++b) {
    int t = b / multi.K + 1;
    int k = b % multi.K + 1;
    // variable bounds follow the stacked layout
    for (int s = 0; s < L.S; ++s) lp.add_var(0.0, price_M, 0.0);
    for (int g = 0; g < L.G; ++g)
      lp.add_var(multi.c.generators[g].p_min, multi.c.generators[g].p_max, 0.0);
    for (int d = 0; d < L.D; ++d)
      lp.add_var(multi.c.loads[d].p_min, multi.c.loads[d].p_max, 0.0);
    for (int i = 0; i < L.N; ++i) lp.add_var(-price_M, price_M, 0.0);
    for (int i = 0; i < 2 * L.G; ++i) lp.add_var(0.0, cfg.dual.gen, 0.0);
    for (int i = 0; i < 2 * L.D; ++i) lp.add_var(0.0, cfg.dual.dem, 0.0);
    for (int i = 0; i < 2 * L.Lf; ++i) lp.add_var(0.0, cfg.dual.flow, 0.0);
    for (int i = 0; i < L.N; ++i) lp.add_var(-opt::kInf, opt::kInf, 0.0);
    // the maximization enters the engine negated, hence -weight
    add_profit_coeffs(multi.c, L, t, k, -multi.weight, b * L.n, obj);
  }

  auto add_linear_row = [&](int block, const VectorXd& p, double lo, double up) {
    opt::LpRow& row = lp.add_row(lo, up);
    for (int j = 0; j < p.size(); ++j)
      if (p[j] != 0.0) row.add(out.var(block, j), p[j]);
    return &row;
  };

  for (int b = 0; b < B; ++b) {
    const qcqp::QcqpForm& q = multi.blocks[b].parent;
    for (const auto& e : q.eqs) add_linear_row(b, e.p, -e.p0, -e.p0);
    for (const auto& i : q.ineqs) add_linear_row(b, i.p, -i.p0, opt::kInf);
  }

  // binaries appended after all continuous variables
  for (int b = 0; b < B; ++b) {
    const qcqp::QcqpForm& q = multi.blocks[b].parent;
    for (int z = 0; z < Z; ++z) {
      PairFix fix = cls ? (*cls)[b][z] : PairFix::kKeepBinary;
      const auto& cp = q.comps[z];
      if (fix == PairFix::kFixPrimalSlack) {
        add_linear_row(b, cp.w, -cp.w0, -cp.w0);
        continue;
      }
      if (fix == PairFix::kFixDualFactor) {
        add_linear_row(b, cp.u, -cp.u0, -cp.u0);
        continue;
      }
      int beta = lp.add_var(0.0, 1.0, 0.0);
      out.binary_of[static_cast<size_t>(b) * Z + z] = beta;
      double md = out.pair_M(z, true), mp = out.pair_M(z, false);
      // dual factor <= M_dual beta
      opt::LpRow& rd = *add_linear_row(b, cp.u, -opt::kInf, -cp.u0);
      rd.add(beta, -md);
      // primal slack <= M_primal (1 - beta)
      opt::LpRow& rp = *add_linear_row(b, cp.w, -opt::kInf, mp - cp.w0);
      rp.add(beta, mp);
      out.mip.int_vars.push_back(beta);
      // branch strategic upper-bound pairs first: they decide whether the
      // strategic unit is capped, which drives the revenue linearization
      int prio = 0;
      if (z >= L.G && z < 2 * L.G && multi.c.generators[z - L.G].strategic)
        prio = 2;
      else if (z < L.G && multi.c.generators[z].strategic)
        prio = 1;
      out.mip.priority.push_back(prio);
    }
  }

  for (const auto& cpl : multi.couplings) {
    double lo = -cpl.offset;
    double up = cpl.equality ? -cpl.offset : opt::kInf;
    opt::LpRow& row = lp.add_row(lo, up);
    for (const auto& term : cpl.terms)
      row.add(out.var(term.block, term.index), term.coef);
  }
  lp.obj.head(obj.size()) = obj;
  for (int b = 0; b < B; ++b)
    for (const auto& cp : multi.blocks[b].parent.comps) out.pairs.push_back(cp);
  return out;
}

}  // namespace

MilpProblem build_milp(const qcqp::MultiQcqp& multi, const BigMConfig& cfg) {
  return build_impl(multi, nullptr, cfg);
}

MilpProblem build_augmented_milp(const qcqp::MultiQcqp& multi, const Classification& cls,
                                 const BigMConfig& cfg) {
  return build_impl(multi, &cls, cfg);
}

double verify_linearization(const market::MarketCase& c,
                            const market::DispatchSolution& sol,
                            const VectorXd& strategic_bids, int slot, int scenario) {
  market::SlotParams sp = market::slot_params(c, strategic_bids, slot, scenario);
  double bilinear = 0.0;
  for (size_t g = 0; g < c.generators.size(); ++g)
    if (c.generators[g].strategic)
      bilinear += sol.lambda[c.generators[g].bus - 1] * sol.P_G[g];

  double lin = 0.0;
  for (size_t d = 0; d < c.loads.size(); ++d)
    lin += sp.b[d] * sol.P_D[d] + c.loads[d].p_min * sol.zeta[d] -
           c.loads[d].p_max * sol.xi[d];
  for (size_t g = 0; g < c.generators.size(); ++g) {
    const auto& gen = c.generators[g];
    if (gen.strategic) continue;
    lin += gen.p_min * sol.sigma[g] - gen.p_max * sol.delta[g] - sp.a[g] * sol.P_G[g];
  }
  auto fl = c.finite_line_idx();
  for (size_t i = 0; i < fl.size(); ++i)
    lin -= c.lines[fl[i]].capacity * (sol.phi[i] + sol.psi[i]);
  return std::abs(bilinear - lin);
}

std::vector<TightPair> check_bigM_tightness(const MilpProblem& m, const VectorXd& x,
                                            double tol) {
  std::vector<TightPair> out;
  for (int b = 0; b < m.blocks; ++b) {
    VectorXd xb = x.segment(static_cast<Eigen::Index>(b) * m.n, m.n);
    for (int z = 0; z < m.Z; ++z) {
      const auto& cp = m.pairs[static_cast<size_t>(b) * m.Z + z];
      double dual = cp.u.dot(xb) + cp.u0;
      double slack = cp.w.dot(xb) + cp.w0;
      if (dual >= m.pair_M(z, true) - tol) out.push_back({b, z, true, dual});
      if (slack >= m.pair_M(z, false) - tol) out.push_back({b, z, false, slack});
    }
  }
  return out;
}

VectorXd warm_start_vector(const MilpProblem& m, const std::vector<VectorXd>& x) {
  if (static_cast<int>(x.size()) != m.blocks)
    throw std::invalid_argument("one block vector per block required");
  VectorXd full = VectorXd::Zero(m.mip.lp.num_vars);
  for (int b = 0; b < m.blocks; ++b)
    full.segment(static_cast<Eigen::Index>(b) * m.n, m.n) = x[b];
  for (int b = 0; b < m.blocks; ++b)
    for (int z = 0; z < m.Z; ++z) {
      int col = m.binary_of[static_cast<size_t>(b) * m.Z + z];
      if (col < 0) continue;
      const auto& cp = m.pairs[static_cast<size_t>(b) * m.Z + z];
      full[col] = cp.u.dot(x[b]) + cp.u0 > 1e-7 ? 1.0 : 0.0;
    }
  return full;
}

MilpResult solve_milp(const MilpProblem& m, opt::MipOptions opts, const VectorXd* start) {
  opt::MipSolution s = opt::solve_mip(m.mip, opts, start);
  MilpResult r;
  r.status = s.status;
  r.nodes = s.nodes;
  r.gap = s.gap;
  if (s.has_incumbent) {
    r.profit = -s.obj;
    r.x = m.split(s.x);
    r.tight = check_bigM_tightness(m, s.x);
  }
  if (s.bound > -opt::kInf) r.bound = -s.bound;
  return r;
}

void export_lp_format(const MilpProblem& m, std::ostream& out) {
  const opt::LinearProgram& lp = m.mip.lp;
  out << "Minimize\n obj:";
  for (int j = 0; j < lp.num_vars; ++j)
    if (lp.obj[j] != 0.0)
      out << (lp.obj[j] >= 0 ? " + " : " - ") << std::abs(lp.obj[j]) << " x" << j;
  out << "\nSubject To\n";
  for (size_t i = 0; i < lp.rows.size(); ++i) {
    const auto& row = lp.rows[i];
    auto body = [&] {
      for (size_t t = 0; t < row.cols.size(); ++t)
        out << (row.vals[t] >= 0 ? " + " : " - ") << std::abs(row.vals[t])
            << " x" << row.cols[t];
    };
    if (row.lo == row.up) {
      out << " c" << i << ":";
      body();
      out << " = " << row.lo << "\n";
    } else {
      if (row.lo > -opt::kInf) {
        out << " c" << i << "lo:";
        body();
        out << " >= " << row.lo << "\n";
      }
      if (row.up < opt::kInf) {
        out << " c" << i << "up:";
        body();
        out << " <= " << row.up << "\n";
      }
    }
  }
  out << "Bounds\n";
  for (int j = 0; j < lp.num_vars; ++j) {
    if (lp.lb[j] == -opt::kInf && lp.ub[j] == opt::kInf)
      out << " x" << j << " free\n";
    else if (lp.lb[j] == -opt::kInf)
      out << " -inf <= x" << j << " <= " << lp.ub[j] << "\n";
    else if (lp.ub[j] == opt::kInf)
      out << " x" << j << " >= " << lp.lb[j] << "\n";
    else
      out << " " << lp.lb[j] << " <= x" << j << " <= " << lp.ub[j] << "\n";
  }
  if (!m.mip.int_vars.empty()) {
    out << "Binary\n";
    for (int v : m.mip.int_vars) out << " x" << v << "\n";
  }
  out << "End\n";
}

}  // namespace nodalbid::milp
