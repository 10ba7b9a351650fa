#include "nodalbid/qcqp/qcqp.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include <Eigen/SVD>

namespace nodalbid::qcqp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VariableLayout VariableLayout::from_case(const market::MarketCase& c) {
  VariableLayout l;
  l.S = c.num_strategic();
  l.G = static_cast<int>(c.generators.size());
  l.D = static_cast<int>(c.loads.size());
  l.N = c.num_buses;
  l.Lf = static_cast<int>(c.finite_line_idx().size());
  l.n = l.S + 3 * l.G + 3 * l.D + 2 * l.N + 2 * l.Lf;
  return l;
}

std::vector<std::pair<std::string, int>> VariableLayout::census() const {
  return {{"bid", S},   {"P_G", G},  {"P_D", D},  {"lambda", N},
          {"sigma", G}, {"delta", G}, {"zeta", D}, {"xi", D},
          {"phi", Lf},  {"psi", Lf},  {"theta", N}};
}

VectorXd VariableLayout::stack(const market::MarketCase& c,
                               const VectorXd& strategic_bids,
                               const market::DispatchSolution& sol) const {
  VectorXd x = VectorXd::Zero(n);
  for (int s = 0; s < S; ++s) x[bid(s)] = strategic_bids[s];
  for (int g = 0; g < G; ++g) {
    x[P_G(g)] = sol.P_G[g];
    x[sigma(g)] = sol.sigma[g];
    x[delta(g)] = sol.delta[g];
  }
  for (int d = 0; d < D; ++d) {
    x[P_D(d)] = sol.P_D[d];
    x[zeta(d)] = sol.zeta[d];
    x[xi(d)] = sol.xi[d];
  }
  for (int b = 0; b < N; ++b) {
    x[lambda(b)] = sol.lambda[b];
    x[theta(b)] = sol.theta[b];
  }
  for (int i = 0; i < Lf; ++i) {
    x[phi(i)] = sol.phi[i];
    x[psi(i)] = sol.psi[i];
  }
  return x;
}

VectorXd ComplementarityPair::d() const {
  if (w0 == 0.0) throw std::logic_error("d_z undefined: slack offset is zero");
  return (2.0 / w0) * w;
}

double QcqpForm::residual(const VectorXd& x) const {
  double r = 0.0;
  for (const auto& e : eqs) r = std::max(r, std::abs(e.value(x)));
  for (const auto& i : ineqs) r = std::max(r, -std::min(i.value(x), 0.0));
  for (const auto& z : comps) r = std::max(r, std::abs(z.value(x)));
  return r;
}

QcqpForm assemble_qcqp(const market::MarketCase& c, const VectorXd* fixed_bids,
                       int slot, int scenario) {
  QcqpForm q;
  q.layout = VariableLayout::from_case(c);
  const auto& L = q.layout;
  auto sidx = c.strategic_idx();
  auto fl = c.finite_line_idx();
  // scenario/hour-scaled non-strategic bids; the strategic entries of sp.a
  // are placeholders (those bids are decision variables here)
  market::SlotParams sp = market::slot_params(c, VectorXd::Zero(L.S), slot, scenario);

  q.F = MatrixXd::Zero(L.n, L.n);
  q.f = VectorXd::Zero(L.n);
  for (int g : sidx) {
    int lam = L.lambda(c.generators[g].bus - 1);
    q.F(lam, L.P_G(g)) += 0.5;
    q.F(L.P_G(g), lam) += 0.5;
    q.f[L.P_G(g)] -= 0.5 * c.generators[g].cost;
  }

  auto eq = [&](VectorXd v, double v0) { q.eqs.push_back({std::move(v), v0}); };
  auto ineq = [&](VectorXd p, double p0) { q.ineqs.push_back({std::move(p), p0}); };

  // nodal balance
  for (int b = 0; b < L.N; ++b) {
    VectorXd v = VectorXd::Zero(L.n);
    for (int g = 0; g < L.G; ++g)
      if (c.generators[g].bus - 1 == b) v[L.P_G(g)] += 1.0;
    for (int d = 0; d < L.D; ++d)
      if (c.loads[d].bus - 1 == b) v[L.P_D(d)] -= 1.0;
    for (const auto& ln : c.lines) {
      double y = 1.0 / ln.reactance;
      if (ln.from - 1 == b) {
        v[L.theta(ln.from - 1)] -= y;
        v[L.theta(ln.to - 1)] += y;
      } else if (ln.to - 1 == b) {
        v[L.theta(ln.to - 1)] -= y;
        v[L.theta(ln.from - 1)] += y;
      }
    }
    eq(std::move(v), 0.0);
  }
  // generator stationarity: a_g - lambda - sigma + delta = 0
  {
    int s = 0;
    for (int g = 0; g < L.G; ++g) {
      VectorXd v = VectorXd::Zero(L.n);
      double v0 = 0.0;
      if (c.generators[g].strategic)
        v[L.bid(s++)] = 1.0;
      else
        v0 = sp.a[g];
      v[L.lambda(c.generators[g].bus - 1)] -= 1.0;
      v[L.sigma(g)] -= 1.0;
      v[L.delta(g)] += 1.0;
      eq(std::move(v), v0);
    }
  }
  // load stationarity: b_d - lambda + zeta - xi = 0
  for (int d = 0; d < L.D; ++d) {
    VectorXd v = VectorXd::Zero(L.n);
    v[L.lambda(c.loads[d].bus - 1)] = -1.0;
    v[L.zeta(d)] = 1.0;
    v[L.xi(d)] = -1.0;
    eq(std::move(v), sp.b[d]);
  }
  // angle stationarity: per bus, sum over incident lines of
  // (lambda_from - lambda_to + psi - phi)/reactance with line orientation
  for (int b = 0; b < L.N; ++b) {
    VectorXd v = VectorXd::Zero(L.n);
    for (size_t l = 0; l < c.lines.size(); ++l) {
      const auto& ln = c.lines[l];
      double sgn = 0.0;
      if (ln.from - 1 == b) sgn = 1.0;
      else if (ln.to - 1 == b) sgn = -1.0;
      else continue;
      double y = sgn / ln.reactance;
      v[L.lambda(ln.from - 1)] += y;
      v[L.lambda(ln.to - 1)] -= y;
      auto it = std::find(fl.begin(), fl.end(), static_cast<int>(l));
      if (it != fl.end()) {
        int i = static_cast<int>(it - fl.begin());
        v[L.psi(i)] += y;
        v[L.phi(i)] -= y;
      }
    }
    eq(std::move(v), 0.0);
  }
  // reference angle pin
  {
    VectorXd v = VectorXd::Zero(L.n);
    v[L.theta(0)] = 1.0;
    eq(std::move(v), 0.0);
  }
  if (fixed_bids) {
    if (fixed_bids->size() != L.S)
      throw std::invalid_argument("fixed bid vector length mismatch");
    for (int s = 0; s < L.S; ++s) {
      VectorXd v = VectorXd::Zero(L.n);
      v[L.bid(s)] = 1.0;
      eq(std::move(v), -(*fixed_bids)[s]);
    }
  }

  // primal slack of each bound, reused verbatim as complementarity factors
  auto slack_gen_lo = [&](int g) {
    VectorXd p = VectorXd::Zero(L.n);
    p[L.P_G(g)] = 1.0;
    return LinearTerm{std::move(p), -c.generators[g].p_min};
  };
  auto slack_gen_hi = [&](int g) {
    VectorXd p = VectorXd::Zero(L.n);
    p[L.P_G(g)] = -1.0;
    return LinearTerm{std::move(p), c.generators[g].p_max};
  };
  auto slack_load_lo = [&](int d) {
    VectorXd p = VectorXd::Zero(L.n);
    p[L.P_D(d)] = 1.0;
    return LinearTerm{std::move(p), -c.loads[d].p_min};
  };
  auto slack_load_hi = [&](int d) {
    VectorXd p = VectorXd::Zero(L.n);
    p[L.P_D(d)] = -1.0;
    return LinearTerm{std::move(p), c.loads[d].p_max};
  };
  auto slack_flow = [&](int i, double sgn) {  // sgn*flow + C >= 0
    const auto& ln = c.lines[fl[i]];
    VectorXd p = VectorXd::Zero(L.n);
    p[L.theta(ln.from - 1)] = sgn / ln.reactance;
    p[L.theta(ln.to - 1)] = -sgn / ln.reactance;
    return LinearTerm{std::move(p), ln.capacity};
  };
  auto dual_factor = [&](int idx) {
    VectorXd u = VectorXd::Zero(L.n);
    u[idx] = 1.0;
    return u;
  };
  auto comp = [&](int dual_idx, const LinearTerm& slack) {
    q.comps.push_back({dual_factor(dual_idx), 0.0, slack.p, slack.p0});
  };

  for (int g = 0; g < L.G; ++g) {
    q.ineqs.push_back(slack_gen_lo(g));
    q.ineqs.push_back(slack_gen_hi(g));
  }
  for (int d = 0; d < L.D; ++d) {
    q.ineqs.push_back(slack_load_lo(d));
    q.ineqs.push_back(slack_load_hi(d));
  }
  for (int i = 0; i < L.Lf; ++i) {
    q.ineqs.push_back(slack_flow(i, 1.0));
    q.ineqs.push_back(slack_flow(i, -1.0));
  }
  // dual nonnegativity
  for (int g = 0; g < L.G; ++g) ineq(dual_factor(L.sigma(g)), 0.0);
  for (int g = 0; g < L.G; ++g) ineq(dual_factor(L.delta(g)), 0.0);
  for (int d = 0; d < L.D; ++d) ineq(dual_factor(L.zeta(d)), 0.0);
  for (int d = 0; d < L.D; ++d) ineq(dual_factor(L.xi(d)), 0.0);
  for (int i = 0; i < L.Lf; ++i) ineq(dual_factor(L.phi(i)), 0.0);
  for (int i = 0; i < L.Lf; ++i) ineq(dual_factor(L.psi(i)), 0.0);

  for (int g = 0; g < L.G; ++g) comp(L.sigma(g), slack_gen_lo(g));
  for (int g = 0; g < L.G; ++g) comp(L.delta(g), slack_gen_hi(g));
  for (int d = 0; d < L.D; ++d) comp(L.zeta(d), slack_load_lo(d));
  for (int d = 0; d < L.D; ++d) comp(L.xi(d), slack_load_hi(d));
  for (int i = 0; i < L.Lf; ++i) comp(L.phi(i), slack_flow(i, 1.0));
  for (int i = 0; i < L.Lf; ++i) comp(L.psi(i), slack_flow(i, -1.0));
  return q;
}

VectorXd ReducedForm::lift(const VectorXd& y) const {
  if (y.size() != r) throw std::invalid_argument("lift: dimension mismatch");
  return O * y + xbar;
}

ReducedForm reduce(const QcqpForm& form) {
  const int n = form.layout.n;
  const int M = static_cast<int>(form.eqs.size());
  ReducedForm rf;
  rf.parent = form;

  MatrixXd V(M, n);
  VectorXd rhs(M);
  for (int m = 0; m < M; ++m) {
    V.row(m) = form.eqs[m].p.transpose();
    rhs[m] = -form.eqs[m].p0;
  }
  if (M == 0) {
    rf.O = MatrixXd::Identity(n, n);
    rf.xbar = VectorXd::Zero(n);
  } else {
    Eigen::BDCSVD<MatrixXd> svd(V, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double cutoff = 1e-9 * (sv.size() ? sv[0] : 0.0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > cutoff) ++rank;
    VectorXd z = svd.matrixU().leftCols(rank).transpose() * rhs;
    for (int i = 0; i < rank; ++i) z[i] /= sv[i];
    rf.xbar = svd.matrixV().leftCols(rank) * z;
    double res = (V * rf.xbar - rhs).lpNorm<Eigen::Infinity>();
    if (res > 1e-7 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()))
      throw std::runtime_error("inconsistent equality system in reduction");
    rf.O = svd.matrixV().rightCols(n - rank);
  }
  rf.r = static_cast<int>(rf.O.cols());

  rf.F_r = rf.O.transpose() * form.F * rf.O;
  rf.F_r = (0.5 * (rf.F_r + rf.F_r.transpose())).eval();
  rf.f_r = rf.O.transpose() * (form.F * rf.xbar + form.f);
  rf.c_r = rf.xbar.dot(form.F * rf.xbar) + 2.0 * form.f.dot(rf.xbar);
  rf.ineqs.reserve(form.ineqs.size());
  for (const auto& i : form.ineqs)
    rf.ineqs.push_back({rf.O.transpose() * i.p, i.value(rf.xbar)});
  rf.comps.reserve(form.comps.size());
  for (const auto& z : form.comps)
    rf.comps.push_back({rf.O.transpose() * z.u, z.u.dot(rf.xbar) + z.u0,
                        rf.O.transpose() * z.w, z.w.dot(rf.xbar) + z.w0});
  return rf;
}

double MultiQcqp::objective(const std::vector<VectorXd>& x) const {
  double v = 0.0;
  for (size_t b = 0; b < blocks.size(); ++b)
    v += weight * blocks[b].parent.objective(x[b]);
  return v;
}

double MultiQcqp::coupling_residual(const std::vector<VectorXd>& x) const {
  double r = 0.0;
  for (const auto& cp : couplings) {
    double v = cp.offset;
    for (const auto& t : cp.terms) v += t.coef * x[t.block][t.index];
    r = std::max(r, cp.equality ? std::abs(v) : -std::min(v, 0.0));
  }
  return r;
}

MultiQcqp assemble_multi(const market::MarketCase& c, const VectorXd* fixed_bids) {
  MultiQcqp m;
  m.c = c;
  m.T = c.horizon;
  m.K = static_cast<int>(c.scenarios.size());
  m.weight = 1.0 / m.K;
  for (int t = 1; t <= m.T; ++t)
    for (int k = 1; k <= m.K; ++k)
      m.blocks.push_back(reduce(assemble_qcqp(c, fixed_bids, t, k)));

  const auto& L = m.layout();
  auto sidx = c.strategic_idx();
  // ramp limits on strategic generation between consecutive slots
  for (int t = 2; t <= m.T; ++t)
    for (int k = 1; k <= m.K; ++k)
      for (int g : sidx)
        for (double sgn : {1.0, -1.0}) {
          Coupling cp;
          cp.terms.push_back({m.block_index(t, k), L.P_G(g), sgn});
          cp.terms.push_back({m.block_index(t - 1, k), L.P_G(g), -sgn});
          cp.offset = c.ramp;
          m.couplings.push_back(std::move(cp));
        }
  // strategic bids identical across scenarios
  for (int t = 1; t <= m.T; ++t)
    for (int k = 2; k <= m.K; ++k)
      for (int s = 0; s < L.S; ++s) {
        Coupling cp;
        cp.terms.push_back({m.block_index(t, k), L.bid(s), 1.0});
        cp.terms.push_back({m.block_index(t, 1), L.bid(s), -1.0});
        cp.equality = true;
        m.couplings.push_back(std::move(cp));
      }
  return m;
}

namespace {

void put_matrix(std::ostream& out, const std::string& name, const MatrixXd& M) {
  out << "matrix " << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (int i = 0; i < M.rows(); ++i) {
    for (int j = 0; j < M.cols(); ++j) out << (j ? " " : "") << M(i, j);
    out << '\n';
  }
}

void put_vector(std::ostream& out, const std::string& name, const VectorXd& v) {
  out << "vector " << name << ' ' << v.size() << '\n';
  for (int i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
  out << '\n';
}

}  // namespace

void dump_archive(const ReducedForm& rf, std::ostream& out) {
  const auto& p = rf.parent;
  const int n = p.layout.n;
  out.precision(17);
  out << "# matrix archive: stacked MPEC and its null-space reduction\n";
  put_matrix(out, "F", p.F);
  put_vector(out, "f", p.f);
  MatrixXd P(p.ineqs.size(), n), V(p.eqs.size(), n), U(p.comps.size(), n),
      W(p.comps.size(), n);
  VectorXd P0(p.ineqs.size()), V0(p.eqs.size()), U0(p.comps.size()), W0(p.comps.size());
  for (size_t i = 0; i < p.ineqs.size(); ++i) {
    P.row(i) = p.ineqs[i].p.transpose();
    P0[i] = p.ineqs[i].p0;
  }
  for (size_t m = 0; m < p.eqs.size(); ++m) {
    V.row(m) = p.eqs[m].p.transpose();
    V0[m] = p.eqs[m].p0;
  }
  for (size_t z = 0; z < p.comps.size(); ++z) {
    U.row(z) = p.comps[z].u.transpose();
    U0[z] = p.comps[z].u0;
    W.row(z) = p.comps[z].w.transpose();
    W0[z] = p.comps[z].w0;
  }
  put_matrix(out, "P", P);
  put_vector(out, "p0", P0);
  put_matrix(out, "V", V);
  put_vector(out, "v0", V0);
  put_matrix(out, "U", U);
  put_vector(out, "u0", U0);
  put_matrix(out, "W", W);
  put_vector(out, "w0", W0);
  put_matrix(out, "O", rf.O);
  put_vector(out, "xbar", rf.xbar);
}

}  // namespace nodalbid::qcqp
