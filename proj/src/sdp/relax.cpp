#include "nodalbid/sdp/relax.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/SVD>

namespace nodalbid::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// homogenized vector (affine offset first)
VectorXd homog(const VectorXd& v, double v0) {
  VectorXd g(v.size() + 1);
  g[0] = v0;
  g.tail(v.size()) = v;
  return g;
}

// symmetrized objective matrix [[c, f^T], [f, F]]
MatrixXd objective_matrix(const MatrixXd& F, const VectorXd& f, double c) {
  int n = static_cast<int>(f.size());
  MatrixXd M(n + 1, n + 1);
  M(0, 0) = c;
  M.block(0, 1, 1, n) = f.transpose();
  M.block(1, 0, n, 1) = f;
  M.block(1, 1, n, n) = F;
  return M;
}

double sym_entry(const VectorXd& a, const VectorXd& b, int i, int j) {
  return 0.5 * (a[i] * b[j] + a[j] * b[i]);
}

// Generic certificate builder: minimize Lambda such that
//   Lambda e1 e1^T - M_obj - sum_i alpha_i sym(g_i e1^T)
//     - sum_{i<=j} rho_ij sym(g_i g_j^T) - sum_z beta_z sym(u_z w_z^T)
//     - sum_m sym(h_m v_m^T)                  (full form only)
//   = S  psd,  alpha >= 0, rho >= 0, beta free, h free.
// Expressed entrywise over the upper triangle of S.
BuiltSdp build_certificate(const MatrixXd& M_obj, const std::vector<VectorXd>& g,
                           const std::vector<std::pair<VectorXd, VectorXd>>& uw,
                           const std::vector<VectorXd>& v) {
  const int dim = static_cast<int>(M_obj.rows());
  const int I = static_cast<int>(g.size());
  const int Z = static_cast<int>(uw.size());
  const int M = static_cast<int>(v.size());
  const int P = I * (I + 1) / 2;

  BuiltSdp out;
  out.dim = dim;
  auto& p = out.problem;
  int blk = p.add_block(dim, MatrixXd::Identity(dim, dim));
  p.C[blk].setZero();
  p.num_nonneg = I + P;
  p.c_nonneg = VectorXd::Zero(I + P);
  p.num_free = 1 + Z + M * dim;  // Lambda, beta, flattened h multipliers
  p.c_free = VectorXd::Zero(1 + Z + M * dim);
  p.c_free[0] = 1.0;  // minimize Lambda

  for (int a = 0; a < dim; ++a)
    for (int b = a; b < dim; ++b) {
      auto& row = p.add_row('=', -M_obj(a, b));
      row.terms.push_back({blk, a, b, 1.0});
      for (int i = 0; i < I; ++i) {
        double c = 0.5 * (g[i][a] * (b == 0 ? 1.0 : 0.0) + g[i][b] * (a == 0 ? 1.0 : 0.0));
        if (c != 0.0) row.nonneg.push_back({i, c});
      }
      int pidx = I;
      for (int i = 0; i < I; ++i)
        for (int j = i; j < I; ++j, ++pidx) {
          double c = sym_entry(g[i], g[j], a, b);
          if (c != 0.0) row.nonneg.push_back({pidx, c});
        }
      for (int z = 0; z < Z; ++z) {
        double c = sym_entry(uw[z].first, uw[z].second, a, b);
        if (c != 0.0) row.free_.push_back({1 + z, c});
      }
      for (int m = 0; m < M; ++m) {
        // sym(h_m v_m^T)_(a,b) is linear in h_m: h_m[a] carries v_m[b]/2
        // and h_m[b] carries v_m[a]/2 (summed when a == b)
        int base = 1 + Z + m * dim;
        if (a == b) {
          if (v[m][a] != 0.0) row.free_.push_back({base + a, v[m][a]});
        } else {
          if (v[m][b] != 0.0) row.free_.push_back({base + a, 0.5 * v[m][b]});
          if (v[m][a] != 0.0) row.free_.push_back({base + b, 0.5 * v[m][a]});
        }
      }
      if (a == 0 && b == 0) row.free_.push_back({0, -1.0});
    }
  return out;
}

// pool layout of a moment block: column 0 = e1, then the homogenized
// inequality vectors, then u-factors, then w-factors
struct MomentPool {
  MatrixXd pool;
  int e1 = 0;
  int ineq0 = 1;
  int u0 = 0, w0 = 0;
  int I = 0, Z = 0;
};

MomentPool moment_pool(const qcqp::ReducedForm& rf, int extra_cols = 0) {
  MomentPool mp;
  mp.I = static_cast<int>(rf.ineqs.size());
  mp.Z = static_cast<int>(rf.comps.size());
  mp.u0 = 1 + mp.I;
  mp.w0 = 1 + mp.I + mp.Z;
  int dim = rf.r + 1;
  mp.pool = MatrixXd::Zero(dim, 1 + mp.I + 2 * mp.Z + extra_cols);
  mp.pool(0, 0) = 1.0;
  for (int i = 0; i < mp.I; ++i)
    mp.pool.col(1 + i) = homog(rf.ineqs[i].p, rf.ineqs[i].p0);
  for (int z = 0; z < mp.Z; ++z) {
    mp.pool.col(mp.u0 + z) = homog(rf.comps[z].u, rf.comps[z].u0);
    mp.pool.col(mp.w0 + z) = homog(rf.comps[z].w, rf.comps[z].w0);
  }
  return mp;
}

void add_moment_rows(opt::ConicProblem& p, int blk, const MomentPool& mp) {
  p.add_row('=', 1.0).terms.push_back({blk, mp.e1, mp.e1, 1.0});
  for (int i = 0; i < mp.I; ++i)
    p.add_row('>', 0.0).terms.push_back({blk, mp.ineq0 + i, mp.e1, 1.0});
  for (int i = 0; i < mp.I; ++i)
    for (int j = i; j < mp.I; ++j)
      p.add_row('>', 0.0).terms.push_back({blk, mp.ineq0 + i, mp.ineq0 + j, 1.0});
  for (int z = 0; z < mp.Z; ++z)
    p.add_row('=', 0.0).terms.push_back({blk, mp.u0 + z, mp.w0 + z, 1.0});
}

}  // namespace

BuiltSdp build_full_sdp(const qcqp::QcqpForm& form) {
  std::vector<VectorXd> g;
  for (const auto& i : form.ineqs) g.push_back(homog(i.p, i.p0));
  std::vector<std::pair<VectorXd, VectorXd>> uw;
  for (const auto& z : form.comps)
    uw.push_back({homog(z.u, z.u0), homog(z.w, z.w0)});
  std::vector<VectorXd> v;
  for (const auto& e : form.eqs) v.push_back(homog(e.p, e.p0));
  return build_certificate(objective_matrix(form.F, form.f, 0.0), g, uw, v);
}

BuiltSdp build_reduced_sdp(const qcqp::ReducedForm& rf) {
  std::vector<VectorXd> g;
  for (const auto& i : rf.ineqs) g.push_back(homog(i.p, i.p0));
  std::vector<std::pair<VectorXd, VectorXd>> uw;
  for (const auto& z : rf.comps) uw.push_back({homog(z.u, z.u0), homog(z.w, z.w0)});
  return build_certificate(objective_matrix(rf.F_r, rf.f_r, rf.c_r), g, uw, {});
}

BuiltSdp build_moment_sdp(const qcqp::ReducedForm& rf) {
  BuiltSdp out;
  out.dim = rf.r + 1;
  out.blocks = 1;
  out.moment = true;
  MomentPool mp = moment_pool(rf);
  int blk = out.problem.add_block(out.dim, mp.pool);
  out.problem.C[blk] = -objective_matrix(rf.F_r, rf.f_r, rf.c_r);
  add_moment_rows(out.problem, blk, mp);
  return out;
}

BuiltSdp build_multi_sdp(const qcqp::MultiQcqp& multi) {
  BuiltSdp out;
  const int B = static_cast<int>(multi.blocks.size());
  out.blocks = B;
  out.dim = multi.blocks[0].r + 1;
  out.moment = true;
  auto& p = out.problem;

  // coupling rows reference x-space coordinates; give every block one extra
  // pool column per referenced index
  std::vector<int> idx_used;
  for (const auto& cp : multi.couplings)
    for (const auto& t : cp.terms)
      if (std::find(idx_used.begin(), idx_used.end(), t.index) == idx_used.end())
        idx_used.push_back(t.index);

  std::vector<MomentPool> pools;
  std::vector<int> extra0(B);
  for (int b = 0; b < B; ++b) {
    const auto& rf = multi.blocks[b];
    MomentPool mp = moment_pool(rf, static_cast<int>(idx_used.size()));
    extra0[b] = 1 + mp.I + 2 * mp.Z;
    for (size_t u = 0; u < idx_used.size(); ++u)
      mp.pool.col(extra0[b] + static_cast<int>(u)) =
          homog(rf.O.transpose() * VectorXd::Unit(rf.parent.layout.n, idx_used[u]), 0.0);
    int blk = p.add_block(out.dim, mp.pool);
    p.C[blk] = -multi.weight *
               objective_matrix(rf.F_r, rf.f_r, rf.c_r);
    add_moment_rows(p, blk, mp);
    pools.push_back(std::move(mp));
  }
  for (const auto& cp : multi.couplings) {
    double rhs = -cp.offset;
    auto& row = p.add_row(cp.equality ? '=' : '>', 0.0);
    for (const auto& t : cp.terms) {
      int u = static_cast<int>(std::find(idx_used.begin(), idx_used.end(), t.index) -
                               idx_used.begin());
      row.terms.push_back({t.block, extra0[t.block] + u, 0 /*e1*/, t.coef});
      rhs -= t.coef * multi.blocks[t.block].xbar[t.index];
    }
    row.rhs = rhs;
  }
  return out;
}

CertificateResult solve_certificate(const BuiltSdp& sdp, const opt::ConicOptions& opts) {
  opt::ConicSolution s = opt::solve_conic(sdp.problem, opts);
  CertificateResult r;
  r.status = s.status;
  r.Lambda = s.pobj;
  r.iterations = s.iterations;
  return r;
}

MomentSolution solve_moment(const BuiltSdp& sdp, const opt::ConicOptions& opts) {
  opt::ConicSolution s = opt::solve_conic(sdp.problem, opts);
  MomentSolution m;
  m.status = s.status;
  // moment problems with many redundant product rows lose primal feasibility
  // in the last digits as the barrier collapses; the dual side still
  // converges, so treat that endgame as solved to working accuracy
  if ((s.status == opt::ConicStatus::kNumerical ||
       s.status == opt::ConicStatus::kMaxIter) &&
      s.gap < 1e-3 && s.dual_res < 1e-6 && s.prim_res < 1e-2)
    m.status = opt::ConicStatus::kOptimal;
  // report the bound from the dual side: the dual iterate is feasible to far
  // tighter tolerance than the primal near degeneracy, so the negated dual
  // value is a valid upper bound on the original problem while the primal
  // value could undercut it
  m.objective = -s.dual_bound;
  m.iterations = s.iterations;
  if (m.status != opt::ConicStatus::kOptimal || s.X.empty()) return m;
  for (int b = 0; b < sdp.blocks; ++b) {
    m.Y.push_back(s.X[b]);
    m.y.push_back(extract_candidate(s.X[b]));
    if (s.X[b].rows() < 2) {
      m.rank_ratio.push_back(0.0);
    } else {
      Eigen::JacobiSVD<MatrixXd> svd(s.X[b]);
      const auto& sv = svd.singularValues();
      m.rank_ratio.push_back(sv[0] > 0 ? sv[1] / sv[0] : 0.0);
    }
  }
  return m;
}

VectorXd extract_candidate(const MatrixXd& Y) {
  if (std::abs(Y(0, 0) - 1.0) > 1e-3)
    throw std::runtime_error("degenerate moment matrix: leading entry far from 1");
  return Y.col(0).tail(Y.rows() - 1) / Y(0, 0);
}

int numeric_rank(const MatrixXd& Y, double tol) {
  Eigen::JacobiSVD<MatrixXd> svd(Y);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0) return 0;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * sv[0]) ++r;
  return r;
}

}  // namespace nodalbid::sdp
