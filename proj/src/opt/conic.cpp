#include "nodalbid/opt/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace nodalbid::opt {

int ConicProblem::add_block(int dim, Eigen::MatrixXd pool) {
  blocks.push_back({dim, std::move(pool)});
  C.emplace_back(Eigen::MatrixXd::Zero(dim, dim));
  return static_cast<int>(blocks.size()) - 1;
}

ConicProblem::Row& ConicProblem::add_row(char sense, double rhs) {
  rows.emplace_back();
  rows.back().sense = sense;
  rows.back().rhs = rhs;
  return rows.back();
}

namespace {

using Eigen::MatrixXd;
using Eigen::MatrixXf;
using Eigen::VectorXd;

struct IRow {
  std::vector<ConicProblem::Term> terms;
  std::vector<std::pair<int, double>> nonneg;  // includes auto slacks
  std::vector<std::pair<int, double>> free_;
  double rhs = 0.0;
};

class Ipm {
 public:
  Ipm(const ConicProblem& prob, ConicOptions opts) : prob_(prob), opts_(opts) {
    build();
  }

  ConicSolution run();

 private:
  void build();
  void residuals();
  void nt_scaling();
  void assemble_schur();
  VectorXd schur_apply(const VectorXd& v);
  void solve_kkt(const VectorXd& rhs1, const VectorXd& rhs2, VectorXd& dy,
                 VectorXd& duf);
  void apply_A(const std::vector<MatrixXd>& M, const VectorXd& vn,
               const VectorXd& vf, VectorXd& out) const;
  void apply_At(const VectorXd& y, std::vector<MatrixXd>& M, VectorXd& vn,
                VectorXd& vf) const;
  double step_to_boundary_psd(const std::vector<MatrixXd>& L,
                              const std::vector<MatrixXd>& D) const;
  static double step_to_boundary_vec(const VectorXd& v, const VectorXd& dv);

  const ConicProblem& prob_;
  ConicOptions opts_;

  int nb_ = 0;           // psd blocks
  int m_ = 0;            // rows
  int nn_ = 0;           // nonneg incl. slacks
  int nf_ = 0;           // free
  double nu_ = 0;        // barrier degree
  std::vector<IRow> rows_;
  VectorXd b_, cn_, cf_;
  VectorXd row_scale_;
  std::vector<MatrixXd> Cmat_;
  std::vector<std::vector<std::pair<int, double>>> nn_cols_;  // var -> (row,coef)
  MatrixXd Af_;  // m x nf dense
  std::vector<std::vector<int>> block_rows_;  // rows with terms per block
  double bnorm_ = 1, cnorm_ = 1;

  // iterate
  std::vector<MatrixXd> X_, S_;
  VectorXd xn_, sn_, uf_, y_;

  // residuals
  VectorXd rp_, rdn_, rdf_;
  std::vector<MatrixXd> Rd_;
  double mu_ = 0, gap_ = 0, pobj_ = 0, dobj_ = 0;
  double relgap_ = kInf, pres_ = kInf, dres_ = kInf;

  // scaling
  std::vector<MatrixXd> R_, Rinv_, W_, Lx_, Ls_, G_;
  std::vector<VectorXd> lam_;
  VectorXd wn_, lamn_;

  // schur
  MatrixXd Sc_;       // double factor (LLT in-place)
  MatrixXf Scf_;      // float factor when enabled
  Eigen::LLT<MatrixXd> llt_;
  Eigen::LLT<MatrixXf> lltf_;
  bool schur_ok_ = false;
  MatrixXd Fborder_;  // S^{-1} Af
  MatrixXd Mborder_;  // Af^T S^{-1} Af
  Eigen::LDLT<MatrixXd> border_ldlt_;

  // block-arrow mode: rows supported by a single PSD block factor per block,
  // multi-block (coupling) rows form a small border
  bool arrow_ = false;
  std::vector<int> grp_;   // row -> group (nb_ means border)
  std::vector<int> lidx_;  // row -> local index within its group
  std::vector<std::vector<int>> grows_;  // group -> rows (last entry: border)
  // per-group factors, decomposed in place; the refinement residual is
  // applied matrix-free so the assembled matrix need not be kept
  std::vector<MatrixXd> Sgf_;
  std::vector<std::unique_ptr<Eigen::LLT<Eigen::Ref<MatrixXd>>>> lltgf_;
  std::vector<MatrixXd> Bg_, Yg_;
  MatrixXd Sbb_, Sarrow_;
  VectorXd sdiag_;  // regularization added to S's diagonal, for the operator
  Eigen::LDLT<MatrixXd> arrow_ldlt_;

  bool arrow_factors_ok_ = false;
  int pcg_worst_ = 1000;  // worst PCG count since the last factorization

  void choose_arrow();
  VectorXd arrow_solve(const VectorXd& r) const;
  VectorXd schur_solve(const VectorXd& r);
};

void Ipm::build() {
  nb_ = static_cast<int>(prob_.blocks.size());
  m_ = static_cast<int>(prob_.rows.size());
  nf_ = prob_.num_free;
  Cmat_ = prob_.C;
  for (auto& c : Cmat_) c = 0.5 * (c + c.transpose()).eval();

  // slacks for inequality rows
  int nslack = 0;
  for (const auto& r : prob_.rows)
    if (r.sense != '=') ++nslack;
  nn_ = prob_.num_nonneg + nslack;

  rows_.resize(m_);
  b_.resize(m_);
  row_scale_.setOnes(m_);
  cn_.setZero(std::max(nn_, 1));
  if (prob_.c_nonneg.size() > 0) cn_.head(prob_.num_nonneg) = prob_.c_nonneg;
  cf_.setZero(std::max(nf_, 1));
  if (prob_.c_free.size() > 0) cf_.head(nf_) = prob_.c_free;

  // pool gram per block, for row norms
  std::vector<MatrixXd> pg(nb_);
  for (int k = 0; k < nb_; ++k)
    pg[k] = prob_.blocks[k].pool.transpose() * prob_.blocks[k].pool;

  int slack = prob_.num_nonneg;
  block_rows_.assign(std::max(nb_, 1), {});
  for (int i = 0; i < m_; ++i) {
    const auto& r = prob_.rows[i];
    IRow& ir = rows_[i];
    ir.terms = r.terms;
    ir.nonneg = r.nonneg;
    ir.free_ = r.free_;
    ir.rhs = r.rhs;
    if (r.sense == '>')
      ir.nonneg.emplace_back(slack++, -1.0);
    else if (r.sense == '<')
      ir.nonneg.emplace_back(slack++, 1.0);
    // frobenius norm of the row coefficient for equilibration
    double nrm2 = 0;
    for (const auto& t1 : ir.terms)
      for (const auto& t2 : ir.terms)
        if (t1.block == t2.block) {
          const MatrixXd& g = pg[t1.block];
          nrm2 += 0.5 * t1.coef * t2.coef *
                  (g(t1.a, t2.a) * g(t1.b, t2.b) + g(t1.a, t2.b) * g(t1.b, t2.a));
        }
    for (const auto& [v, c] : ir.nonneg) nrm2 += c * c;
    for (const auto& [v, c] : ir.free_) nrm2 += c * c;
    double sc = std::sqrt(std::max(nrm2, 1e-12));
    row_scale_[i] = sc;
    for (auto& t : ir.terms) t.coef /= sc;
    for (auto& p : ir.nonneg) p.second /= sc;
    for (auto& p : ir.free_) p.second /= sc;
    b_[i] = r.rhs / sc;
    bool seen[64] = {};
    for (const auto& t : ir.terms)
      if (t.block < 64 && !seen[t.block]) {
        seen[t.block] = true;
        block_rows_[t.block].push_back(i);
      }
  }

  nn_cols_.assign(std::max(nn_, 1), {});
  Af_ = MatrixXd::Zero(m_, std::max(nf_, 1));
  for (int i = 0; i < m_; ++i) {
    for (const auto& [v, c] : rows_[i].nonneg) nn_cols_[v].push_back({i, c});
    for (const auto& [v, c] : rows_[i].free_) Af_(i, v) += c;
  }

  nu_ = nn_;
  for (const auto& bl : prob_.blocks) nu_ += bl.dim;
  bnorm_ = 1.0 + b_.cwiseAbs().maxCoeff();
  double cmax = 0;
  for (const auto& c : Cmat_) if (c.size()) cmax = std::max(cmax, c.cwiseAbs().maxCoeff());
  if (nn_ > 0) cmax = std::max(cmax, cn_.head(nn_).cwiseAbs().maxCoeff());
  if (nf_ > 0) cmax = std::max(cmax, cf_.head(nf_).cwiseAbs().maxCoeff());
  cnorm_ = 1.0 + cmax;

  choose_arrow();
}

void Ipm::choose_arrow() {
  // a dense m x m Schur matrix is quadratic in the row count; when rows
  // partition by the single PSD block they touch, factor per block and treat
  // the few multi-block coupling rows as a border
  arrow_ = false;
  // the env override exercises the arrow path on problems small enough for
  // the dense factorization, for cross-checking
  bool force = std::getenv("NODALBID_CONIC_ARROW") != nullptr;
  if (nb_ < 2 || (m_ < 6000 && !force)) return;
  grp_.assign(m_, nb_);
  for (int i = 0; i < m_; ++i) {
    int g = -1;
    bool multi = false;
    for (const auto& t : rows_[i].terms) {
      if (g == -1)
        g = t.block;
      else if (t.block != g) {
        multi = true;
        break;
      }
    }
    grp_[i] = (g >= 0 && !multi) ? g : nb_;
  }
  // a nonneg variable whose rows span two diagonal groups would couple them
  // off the border; push all its rows into the border instead
  bool changed = true;
  while (changed) {
    changed = false;
    for (int v = 0; v < nn_; ++v) {
      const auto& col = nn_cols_[v];
      int g = -1;
      bool conflict = false;
      for (const auto& [r, c] : col) {
        (void)c;
        if (grp_[r] == nb_) continue;
        if (g == -1)
          g = grp_[r];
        else if (grp_[r] != g) {
          conflict = true;
          break;
        }
      }
      if (!conflict) continue;
      for (const auto& [r, c] : col) {
        (void)c;
        if (grp_[r] != nb_) {
          grp_[r] = nb_;
          changed = true;
        }
      }
    }
  }
  grows_.assign(nb_ + 1, {});
  lidx_.assign(m_, -1);
  for (int i = 0; i < m_; ++i) {
    lidx_[i] = static_cast<int>(grows_[grp_[i]].size());
    grows_[grp_[i]].push_back(i);
  }
  int border = static_cast<int>(grows_[nb_].size());
  arrow_ = border <= m_ / 4;
  if (std::getenv("NODALBID_CONIC_DEBUG")) {
    size_t maxg = 0;
    for (int g = 0; g < nb_; ++g) maxg = std::max(maxg, grows_[g].size());
    std::fprintf(stderr,
                 "conic: m=%d nb=%d nn=%d nf=%d border=%d maxgroup=%zu arrow=%d\n",
                 m_, nb_, nn_, nf_, border, maxg, arrow_ ? 1 : 0);
  }
}

void Ipm::apply_A(const std::vector<MatrixXd>& M, const VectorXd& vn,
                  const VectorXd& vf, VectorXd& out) const {
  out.setZero(m_);
  std::vector<MatrixXd> U(nb_);
  for (int k = 0; k < nb_; ++k)
    if (!block_rows_[k].empty())
      U[k] = prob_.blocks[k].pool.transpose() * M[k] * prob_.blocks[k].pool;
  for (int i = 0; i < m_; ++i) {
    double s = 0;
    for (const auto& t : rows_[i].terms) s += t.coef * U[t.block](t.a, t.b);
    for (const auto& [v, c] : rows_[i].nonneg) s += c * vn[v];
    for (const auto& [v, c] : rows_[i].free_) s += c * vf[v];
    out[i] = s;
  }
}

void Ipm::apply_At(const VectorXd& y, std::vector<MatrixXd>& M, VectorXd& vn,
                   VectorXd& vf) const {
  M.resize(nb_);
  std::vector<MatrixXd> theta(nb_);
  for (int k = 0; k < nb_; ++k) {
    theta[k] = MatrixXd::Zero(prob_.blocks[k].pool.cols(), prob_.blocks[k].pool.cols());
    M[k].setZero(prob_.blocks[k].dim, prob_.blocks[k].dim);
  }
  vn.setZero(std::max(nn_, 1));
  vf.setZero(std::max(nf_, 1));
  for (int i = 0; i < m_; ++i) {
    double yi = y[i];
    if (yi == 0.0) continue;
    for (const auto& t : rows_[i].terms) {
      theta[t.block](t.a, t.b) += 0.5 * t.coef * yi;
      theta[t.block](t.b, t.a) += 0.5 * t.coef * yi;
    }
    for (const auto& [v, c] : rows_[i].nonneg) vn[v] += c * yi;
    for (const auto& [v, c] : rows_[i].free_) vf[v] += c * yi;
  }
  for (int k = 0; k < nb_; ++k)
    if (!block_rows_[k].empty())
      M[k] = prob_.blocks[k].pool * theta[k] * prob_.blocks[k].pool.transpose();
}

void Ipm::residuals() {
  VectorXd ax;
  apply_A(X_, xn_, uf_, ax);
  rp_ = b_ - ax;

  std::vector<MatrixXd> Aty;
  VectorXd atyn, atyf;
  apply_At(y_, Aty, atyn, atyf);
  Rd_.resize(nb_);
  for (int k = 0; k < nb_; ++k) Rd_[k] = Cmat_[k] - Aty[k] - S_[k];
  rdn_ = cn_ - atyn - sn_;
  rdf_ = cf_ - atyf;

  gap_ = 0;
  pobj_ = 0;
  for (int k = 0; k < nb_; ++k) {
    gap_ += (X_[k].array() * S_[k].array()).sum();
    pobj_ += (Cmat_[k].array() * X_[k].array()).sum();
  }
  if (nn_) {
    gap_ += xn_.head(nn_).dot(sn_.head(nn_));
    pobj_ += cn_.head(nn_).dot(xn_.head(nn_));
  }
  if (nf_) pobj_ += cf_.head(nf_).dot(uf_.head(nf_));
  dobj_ = b_.dot(y_);
  mu_ = gap_ / std::max(nu_, 1.0);
  relgap_ = gap_ / (1.0 + std::abs(pobj_) + std::abs(dobj_));
  pres_ = rp_.norm() / bnorm_;
  double dn2 = rdn_.head(std::max(nn_, 0)).squaredNorm() +
               rdf_.head(std::max(nf_, 0)).squaredNorm();
  for (int k = 0; k < nb_; ++k) dn2 += Rd_[k].squaredNorm();
  dres_ = std::sqrt(dn2) / cnorm_;
}

void Ipm::nt_scaling() {
  R_.resize(nb_);
  Rinv_.resize(nb_);
  W_.resize(nb_);
  Lx_.resize(nb_);
  Ls_.resize(nb_);
  lam_.resize(nb_);
  for (int k = 0; k < nb_; ++k) {
    Eigen::LLT<MatrixXd> cx(X_[k]), cs(S_[k]);
    if (cx.info() != Eigen::Success || cs.info() != Eigen::Success)
      throw std::runtime_error("conic: iterate left the cone");
    Lx_[k] = cx.matrixL();
    Ls_[k] = cs.matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(Ls_[k].transpose() * Lx_[k],
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
    VectorXd sig = svd.singularValues();
    lam_[k] = sig;
    VectorXd si = sig.cwiseSqrt().cwiseInverse();
    R_[k] = Lx_[k] * svd.matrixV() * si.asDiagonal();
    Rinv_[k] = si.asDiagonal() * svd.matrixU().transpose() * Ls_[k].transpose();
    W_[k] = R_[k] * R_[k].transpose();
  }
  if (nn_) {
    wn_ = (xn_.head(nn_).array() / sn_.head(nn_).array()).sqrt();
    lamn_ = (xn_.head(nn_).array() * sn_.head(nn_).array()).sqrt();
  }
}

void Ipm::assemble_schur() {
  G_.resize(nb_);
  auto accumulate = [&](auto&& add) {
    for (int k = 0; k < nb_; ++k) {
      if (block_rows_[k].empty()) continue;
      MatrixXd Q = R_[k].transpose() * prob_.blocks[k].pool;
      G_[k] = Q.transpose() * Q;
      const auto& rows = block_rows_[k];
      const MatrixXd& g = G_[k];
      for (size_t ii = 0; ii < rows.size(); ++ii) {
        int i = rows[ii];
        for (size_t jj = ii; jj < rows.size(); ++jj) {
          int j = rows[jj];
          double s = 0;
          for (const auto& t1 : rows_[i].terms) {
            if (t1.block != k) continue;
            for (const auto& t2 : rows_[j].terms) {
              if (t2.block != k) continue;
              s += 0.5 * t1.coef * t2.coef *
                   (g(t1.a, t2.a) * g(t1.b, t2.b) + g(t1.a, t2.b) * g(t1.b, t2.a));
            }
          }
          add(i, j, s);
        }
      }
    }
    for (int v = 0; v < nn_; ++v) {
      double w2 = wn_[v] * wn_[v];
      const auto& col = nn_cols_[v];
      for (size_t a = 0; a < col.size(); ++a)
        for (size_t bcol = a; bcol < col.size(); ++bcol)
          add(col[a].first, col[bcol].first,
              col[a].second * col[bcol].second * w2);
    }
  };
  // tiny diagonal regularization guards rank-deficient row sets; relative to
  // each row's own diagonal so well-scaled rows are not drowned out when the
  // scaling weights span many orders of magnitude
  auto regularize = [](Eigen::Ref<MatrixXd> M) {
    M.diagonal() = M.diagonal().cwiseMax(0.0) * (1.0 + 1e-12);
    M.diagonal().array() += 1e-13;
  };

  if (arrow_) {
    int nbdr = static_cast<int>(grows_[nb_].size());
    if (Sgf_.empty()) {
      Sgf_.resize(nb_);
      for (int g = 0; g < nb_; ++g) {
        int ng = static_cast<int>(grows_[g].size());
        Sgf_[g].resize(std::max(ng, 1), std::max(ng, 1));
      }
    }
    lltgf_.clear();
    lltgf_.resize(nb_);
    Bg_.assign(nb_, {});
    Yg_.assign(nb_, {});
    Sbb_.setZero(std::max(nbdr, 1), std::max(nbdr, 1));
    for (int g = 0; g < nb_; ++g) {
      Sgf_[g].setZero();
      Bg_[g].setZero(std::max<int>(grows_[g].size(), 1), std::max(nbdr, 1));
    }
    accumulate([&](int i, int j, double s) {
      int gi = grp_[i], gj = grp_[j];
      if (gi == gj && gi < nb_) {
        Sgf_[gi](lidx_[i], lidx_[j]) += s;
        if (i != j) Sgf_[gi](lidx_[j], lidx_[i]) += s;
      } else if (gi == nb_ && gj == nb_) {
        Sbb_(lidx_[i], lidx_[j]) += s;
        if (i != j) Sbb_(lidx_[j], lidx_[i]) += s;
      } else if (gi == nb_) {
        Bg_[gj](lidx_[j], lidx_[i]) += s;
      } else {
        Bg_[gi](lidx_[i], lidx_[j]) += s;
      }
    });
    // the same row-relative regularization the dense path applies; kept as a
    // vector so the matrix-free operator matches the factored matrices
    sdiag_.setZero(m_);
    for (int i = 0; i < m_; ++i) {
      double d = grp_[i] < nb_ ? Sgf_[grp_[i]](lidx_[i], lidx_[i])
                               : Sbb_(lidx_[i], lidx_[i]);
      sdiag_[i] = std::max(d, 0.0) * 1e-12 + 1e-13;
    }
    for (int i = 0; i < m_; ++i) {
      if (grp_[i] < nb_) {
        double& d = Sgf_[grp_[i]](lidx_[i], lidx_[i]);
        d = std::max(d, 0.0) + sdiag_[i];
      } else {
        double& d = Sbb_(lidx_[i], lidx_[i]);
        d = std::max(d, 0.0) + sdiag_[i];
      }
    }
    Sarrow_ = Sbb_;
    for (int g = 0; g < nb_; ++g) {
      if (grows_[g].empty()) continue;
      lltgf_[g] = std::make_unique<Eigen::LLT<Eigen::Ref<MatrixXd>>>(Sgf_[g]);
      if (lltgf_[g]->info() != Eigen::Success)
        throw std::runtime_error("conic: schur factorization failed");
      if (nbdr) {
        Yg_[g] = lltgf_[g]->solve(Bg_[g]);
        Sarrow_.noalias() -= Bg_[g].transpose() * Yg_[g];
      }
    }
    if (nbdr) {
      Sarrow_ = 0.5 * (Sarrow_ + Sarrow_.transpose()).eval();
      Sarrow_.diagonal().array() += 1e-13;
      arrow_ldlt_.compute(Sarrow_);
      if (arrow_ldlt_.info() != Eigen::Success)
        throw std::runtime_error("conic: schur factorization failed");
    }
    schur_ok_ = true;
    if (std::getenv("NODALBID_CONIC_SELFTEST") && m_ < 3000) {
      MatrixXd Sd = MatrixXd::Zero(m_, m_);
      accumulate([&](int i, int j, double s) {
        Sd(i, j) += s;
        if (i != j) Sd(j, i) += s;
      });
      VectorXd v = VectorXd::Random(m_);
      VectorXd d1 = Sd * v, d2 = schur_apply(v);
      std::fprintf(stderr, "  selftest apply diff=%.3e (norm %.3e)\n",
                   (d1 - d2).norm(), d1.norm());
    }
  } else {
    Sc_.setZero(m_, m_);
    accumulate([&](int i, int j, double s) {
      Sc_(i, j) += s;
      if (i != j) Sc_(j, i) += s;
    });
    regularize(Sc_);
    if (opts_.use_float_factor) {
      Scf_ = Sc_.cast<float>();
      lltf_.compute(Scf_);
      schur_ok_ = (lltf_.info() == Eigen::Success);
      if (!schur_ok_) {
        llt_.compute(Sc_);
        schur_ok_ = (llt_.info() == Eigen::Success);
      }
    } else {
      llt_.compute(Sc_);
      schur_ok_ = (llt_.info() == Eigen::Success);
    }
    if (!schur_ok_) throw std::runtime_error("conic: schur factorization failed");
  }

  if (nf_) {
    Fborder_.resize(m_, nf_);
    for (int j = 0; j < nf_; ++j) Fborder_.col(j) = schur_solve(Af_.col(j));
    Mborder_ = Af_.leftCols(nf_).transpose() * Fborder_;
    border_ldlt_.compute(Mborder_);
  }
}

VectorXd Ipm::schur_apply(const VectorXd& v) {
  if (!arrow_) return Sc_ * v;
  // matrix-free S v = A(W A^T(v) W) plus the scaled nonneg columns; the
  // assembled per-group matrices were consumed by the in-place factors
  std::vector<MatrixXd> M;
  VectorXd vn, vf;
  apply_At(v, M, vn, vf);
  for (int k = 0; k < nb_; ++k)
    if (!block_rows_[k].empty()) M[k] = W_[k] * M[k] * W_[k];
  if (nn_) vn.head(nn_).array() *= wn_.array().square();
  VectorXd zf = VectorXd::Zero(std::max(nf_, 1));
  VectorXd out;
  apply_A(M, vn, zf, out);
  out.array() += sdiag_.array() * v.array();
  return out;
}

VectorXd Ipm::arrow_solve(const VectorXd& r) const {
  int nbdr = static_cast<int>(grows_[nb_].size());
  VectorXd x(m_);
  std::vector<VectorXd> tg(nb_);
  VectorXd rb = VectorXd::Zero(std::max(nbdr, 1));
  for (int t = 0; t < nbdr; ++t) rb[t] = r[grows_[nb_][t]];
  for (int g = 0; g < nb_; ++g) {
    int ng = static_cast<int>(grows_[g].size());
    if (!ng) continue;
    VectorXd rg(ng);
    for (int t = 0; t < ng; ++t) rg[t] = r[grows_[g][t]];
    tg[g] = lltgf_[g]->solve(rg);
    if (nbdr) rb.noalias() -= Bg_[g].transpose() * tg[g];
  }
  VectorXd xb = VectorXd::Zero(std::max(nbdr, 1));
  if (nbdr) xb = arrow_ldlt_.solve(rb);
  for (int g = 0; g < nb_; ++g) {
    int ng = static_cast<int>(grows_[g].size());
    if (!ng) continue;
    VectorXd xg = tg[g];
    if (nbdr) xg.noalias() -= Yg_[g] * xb;
    for (int t = 0; t < ng; ++t) x[grows_[g][t]] = xg[t];
  }
  for (int t = 0; t < nbdr; ++t) x[grows_[nb_][t]] = xb[t];
  return x;
}

VectorXd Ipm::schur_solve(const VectorXd& r) {
  if (arrow_) {
    // PCG with the block factorization as the preconditioner; adaptive where
    // a fixed number of refinement passes can diverge on ill-conditioned
    // endgame systems
    VectorXd x = VectorXd::Zero(m_);
    VectorXd res = r;
    double r0 = r.norm();
    if (r0 == 0.0) return x;
    VectorXd z = arrow_solve(res);
    VectorXd p = z;
    double rz = res.dot(z);
    int it = 0;
    for (; it < 200; ++it) {
      if (res.norm() <= 1e-12 * r0 || rz <= 0 || !std::isfinite(rz)) break;
      VectorXd Sp = schur_apply(p);
      double pSp = p.dot(Sp);
      if (pSp <= 0 || !std::isfinite(pSp)) break;
      double alpha = rz / pSp;
      x += alpha * p;
      res -= alpha * Sp;
      z = arrow_solve(res);
      double rz2 = res.dot(z);
      p = z + (rz2 / rz) * p;
      rz = rz2;
    }
    if (std::getenv("NODALBID_CONIC_DEBUG"))
      std::fprintf(stderr, "  pcg it=%d rel=%.3e rz=%.3e\n", it,
                   res.norm() / r0, rz);
    return x;
  }
  if (opts_.use_float_factor && lltf_.info() == Eigen::Success) {
    VectorXd x = lltf_.solve(r.cast<float>()).cast<double>();
    for (int it = 0; it < 2; ++it) {
      VectorXd res = r - schur_apply(x);
      x += lltf_.solve(res.cast<float>()).cast<double>();
    }
    return x;
  }
  VectorXd x = llt_.solve(r);
  for (int it = 0; it < 2; ++it) x += llt_.solve((r - schur_apply(x)).eval());
  return x;
}

void Ipm::solve_kkt(const VectorXd& rhs1, const VectorXd& rhs2, VectorXd& dy,
                    VectorXd& duf) {
  if (nf_ == 0) {
    dy = schur_solve(rhs1);
    duf.setZero(1);
    return;
  }
  VectorXd t = schur_solve(rhs1);
  VectorXd rhs_f = Af_.leftCols(nf_).transpose() * t - rhs2;
  duf = border_ldlt_.solve(rhs_f);
  dy = t - Fborder_ * duf;
  // duf solves (Af^T S^-1 Af) duf = Af^T S^-1 rhs1 - rhs2
}

double Ipm::step_to_boundary_psd(const std::vector<MatrixXd>& L,
                                 const std::vector<MatrixXd>& D) const {
  double alpha = kInf;
  for (int k = 0; k < nb_; ++k) {
    MatrixXd T = L[k].triangularView<Eigen::Lower>().solve(D[k]);
    MatrixXd M = L[k].triangularView<Eigen::Lower>()
                     .solve(T.transpose())
                     .transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()),
                                               Eigen::EigenvaluesOnly);
    double emin = es.eigenvalues().minCoeff();
    if (emin < 0) alpha = std::min(alpha, -1.0 / emin);
  }
  return alpha;
}

double Ipm::step_to_boundary_vec(const VectorXd& v, const VectorXd& dv) {
  double alpha = kInf;
  for (int i = 0; i < v.size(); ++i)
    if (dv[i] < 0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

ConicSolution Ipm::run() {
  auto t0 = std::chrono::steady_clock::now();
  // start at a well-centered scaled identity
  double xi = std::sqrt(bnorm_);
  double eta = std::sqrt(cnorm_);
  X_.resize(nb_);
  S_.resize(nb_);
  for (int k = 0; k < nb_; ++k) {
    X_[k] = xi * MatrixXd::Identity(prob_.blocks[k].dim, prob_.blocks[k].dim);
    S_[k] = eta * MatrixXd::Identity(prob_.blocks[k].dim, prob_.blocks[k].dim);
  }
  xn_ = VectorXd::Constant(std::max(nn_, 1), xi);
  sn_ = VectorXd::Constant(std::max(nn_, 1), eta);
  uf_.setZero(std::max(nf_, 1));
  y_.setZero(m_);

  ConicSolution out;
  double best_progress_mu = kInf;
  int stall = 0;

  // best iterate seen, by worst-of residual measure; restored at exit if the
  // final iterate regressed (degenerate problems lose primal feasibility as
  // the barrier parameter collapses)
  struct Snapshot {
    std::vector<MatrixXd> X, S;
    VectorXd xn, sn, uf, y;
    double quality = kInf;
  } best;

  double best_dual = -kInf;
  for (int iter = 0; iter < opts_.max_iter; ++iter) {
    residuals();
    double quality = std::max({relgap_, pres_, dres_});
    if (quality < best.quality) {
      best = {X_, S_, xn_, sn_, uf_, y_, quality};
    }
    if (dres_ < 1e-7 && dobj_ > best_dual) best_dual = dobj_;
    if (opts_.verbose)
      std::fprintf(stderr, "ipm %3d  mu %.3e  gap %.3e  pres %.3e  dres %.3e\n",
                   iter, mu_, relgap_, pres_, dres_);
    out.iterations = iter;
    if (relgap_ < opts_.tol_gap && pres_ < opts_.tol_feas && dres_ < opts_.tol_feas) {
      out.status = ConicStatus::kOptimal;
      break;
    }
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
    if (dt.count() > opts_.time_limit) {
      out.status = ConicStatus::kMaxIter;
      break;
    }
    double merit = mu_ + bnorm_ * pres_ + cnorm_ * dres_;
    if (merit < best_progress_mu * 0.995) {
      best_progress_mu = merit;
      stall = 0;
    } else if (++stall > 12) {
      // classify by which side still violates
      if (pres_ < opts_.tol_feas * 10 && dres_ < opts_.tol_feas * 10 &&
          relgap_ < opts_.tol_gap * 100)
        out.status = ConicStatus::kOptimal;
      else if (b_.dot(y_) > 0 && dres_ > 1e3 * pres_)
        out.status = ConicStatus::kPrimalInfeasible;
      else if (pobj_ < -1e10)
        out.status = ConicStatus::kDualInfeasible;
      else
        out.status = ConicStatus::kNumerical;
      break;
    }

    try {
    nt_scaling();
    assemble_schur();

    // ---- affine (predictor) direction: target sigma = 0 ----
    // d = -lambda  in scaled space
    std::vector<MatrixXd> Dmat(nb_);
    for (int k = 0; k < nb_; ++k) Dmat[k] = (-lam_[k]).asDiagonal();
    VectorXd dn = nn_ ? VectorXd(-lamn_) : VectorXd();

    auto make_rhs = [&](const std::vector<MatrixXd>& dM, const VectorXd& dnv,
                        VectorXd& rhs1) {
      // rhs1 = rp - A(R d R^T) + A(W Rd W) - A_n(w dn) + A_n(w^2 rdn)
      // computed in scaled space, R (R^T Rd R - D) R^T, to avoid the
      // catastrophic cancellation of W Rd W - R D R^T near convergence
      std::vector<MatrixXd> T(nb_);
      for (int k = 0; k < nb_; ++k) {
        MatrixXd inner = R_[k].transpose() * Rd_[k] * R_[k] - dM[k];
        T[k] = R_[k] * inner * R_[k].transpose();
      }
      VectorXd vn = VectorXd::Zero(std::max(nn_, 1));
      if (nn_)
        vn.head(nn_) = wn_.array() * wn_.array() * rdn_.head(nn_).array() -
                       wn_.array() * dnv.array();
      VectorXd vf = VectorXd::Zero(std::max(nf_, 1));
      VectorXd av;
      apply_A(T, vn, vf, av);
      rhs1 = rp_ + av;
    };

    VectorXd rhs1, dy_a, duf_a;
    make_rhs(Dmat, dn, rhs1);
    solve_kkt(rhs1, nf_ ? VectorXd(rdf_.head(nf_)) : VectorXd::Zero(1), dy_a, duf_a);

    auto recover = [&](const VectorXd& dy, const std::vector<MatrixXd>& dM,
                       const VectorXd& dnv, std::vector<MatrixXd>& dX,
                       std::vector<MatrixXd>& dS, VectorXd& dxn, VectorXd& dsn) {
      std::vector<MatrixXd> Aty;
      VectorXd atyn, atyf;
      apply_At(dy, Aty, atyn, atyf);
      dX.resize(nb_);
      dS.resize(nb_);
      for (int k = 0; k < nb_; ++k) {
        dS[k] = Rd_[k] - Aty[k];
        dS[k] = 0.5 * (dS[k] + dS[k].transpose()).eval();
        MatrixXd inner = dM[k] - R_[k].transpose() * dS[k] * R_[k];
        dX[k] = R_[k] * inner * R_[k].transpose();
        dX[k] = 0.5 * (dX[k] + dX[k].transpose()).eval();
      }
      dxn.setZero(std::max(nn_, 1));
      dsn.setZero(std::max(nn_, 1));
      if (nn_) {
        dsn.head(nn_) = rdn_.head(nn_) - atyn.head(nn_);
        dxn.head(nn_) = wn_.array() * dnv.array() -
                        wn_.array() * wn_.array() * dsn.head(nn_).array();
      }
    };

    std::vector<MatrixXd> dX_a, dS_a;
    VectorXd dxn_a, dsn_a;
    recover(dy_a, Dmat, dn, dX_a, dS_a, dxn_a, dsn_a);

    double ap = std::min({1.0, step_to_boundary_psd(Lx_, dX_a),
                          nn_ ? step_to_boundary_vec(xn_.head(nn_), dxn_a.head(nn_)) : kInf});
    double ad = std::min({1.0, step_to_boundary_psd(Ls_, dS_a),
                          nn_ ? step_to_boundary_vec(sn_.head(nn_), dsn_a.head(nn_)) : kInf});
    // mu after the affine step
    double gap_aff = 0;
    for (int k = 0; k < nb_; ++k)
      gap_aff += ((X_[k] + ap * dX_a[k]).array() * (S_[k] + ad * dS_a[k]).array()).sum();
    if (nn_)
      gap_aff += (xn_.head(nn_) + ap * dxn_a.head(nn_))
                     .dot(sn_.head(nn_) + ad * dsn_a.head(nn_));
    double sigma = std::pow(std::max(gap_aff, 0.0) / gap_, 3.0);
    sigma = std::min(std::max(sigma, 1e-8), 1.0);

    // ---- corrector: d = lambda^{-1} o (sigma mu I - lam^2 - dxhat o dshat) ----
    for (int k = 0; k < nb_; ++k) {
      MatrixXd dxh = Rinv_[k] * dX_a[k] * Rinv_[k].transpose();
      MatrixXd dsh = R_[k].transpose() * dS_a[k] * R_[k];
      MatrixXd corr = 0.5 * (dxh * dsh + dsh * dxh);
      const VectorXd& l = lam_[k];
      // target T = sigma*mu*I - Lam^2 - corr, then divide by the Jordan product
      MatrixXd Tt = -corr;
      for (int d = 0; d < l.size(); ++d) Tt(d, d) += sigma * mu_ - l[d] * l[d];
      MatrixXd Z(l.size(), l.size());
      for (int i2 = 0; i2 < l.size(); ++i2)
        for (int j2 = 0; j2 < l.size(); ++j2)
          Z(i2, j2) = 2.0 * Tt(i2, j2) / (l[i2] + l[j2]);
      Dmat[k] = Z;
    }
    if (nn_)
      dn = ((sigma * mu_ - lamn_.array().square() -
             (dxn_a.head(nn_).array() / wn_.array()) *
                 (dsn_a.head(nn_).array() * wn_.array())) /
            lamn_.array())
               .matrix();

    VectorXd dy, duf;
    make_rhs(Dmat, dn, rhs1);
    solve_kkt(rhs1, nf_ ? VectorXd(rdf_.head(nf_)) : VectorXd::Zero(1), dy, duf);
    std::vector<MatrixXd> dX, dS;
    VectorXd dxn, dsn;
    recover(dy, Dmat, dn, dX, dS, dxn, dsn);

    // the dual and complementarity equations hold by construction; refine the
    // primal equation A(dX) + An dxn + Af duf = rp against the original data,
    // where scaling-amplified Schur error concentrates
    double prev_err = kInf;
    for (int pass = 0; pass < 6; ++pass) {
      VectorXd achieved;
      apply_A(dX, dxn, duf, achieved);
      VectorXd err = rp_ - achieved;
      double en = err.norm();
      if (en <= 1e-13 * bnorm_ || en >= 0.5 * prev_err) break;
      prev_err = en;
      VectorXd ddy, dduf;
      solve_kkt(err, VectorXd::Zero(std::max(nf_, 1)), ddy, dduf);
      std::vector<MatrixXd> Aty;
      VectorXd atyn, atyf;
      apply_At(ddy, Aty, atyn, atyf);
      for (int k = 0; k < nb_; ++k) {
        MatrixXd dds = -0.5 * (Aty[k] + Aty[k].transpose());
        MatrixXd ddx = -(R_[k] * (R_[k].transpose() * dds * R_[k]) * R_[k].transpose());
        dS[k] += dds;
        dX[k] += 0.5 * (ddx + ddx.transpose()).eval();
      }
      if (nn_) {
        dsn.head(nn_) -= atyn.head(nn_);
        dxn.head(nn_).array() += wn_.array() * wn_.array() * atyn.head(nn_).array();
      }
      dy += ddy;
      if (nf_) duf.head(nf_) += dduf.head(nf_);
    }

    double bp = step_to_boundary_psd(Lx_, dX);
    double bd = step_to_boundary_psd(Ls_, dS);
    if (nn_) {
      bp = std::min(bp, step_to_boundary_vec(xn_.head(nn_), dxn.head(nn_)));
      bd = std::min(bd, step_to_boundary_vec(sn_.head(nn_), dsn.head(nn_)));
    }
    // common step length keeps the infeasible-start iterates consistent
    double alpha_p = std::min({1.0, 0.99 * bp, 0.99 * bd});
    double alpha_d = alpha_p;

    for (int k = 0; k < nb_; ++k) {
      X_[k] += alpha_p * dX[k];
      S_[k] += alpha_d * dS[k];
    }
    if (nn_) {
      xn_.head(nn_) += alpha_p * dxn.head(nn_);
      sn_.head(nn_) += alpha_d * dsn.head(nn_);
    }
    if (nf_) uf_.head(nf_) += alpha_p * duf.head(nf_);
    y_ += alpha_d * dy;
    out.iterations = iter + 1;
    if (iter == opts_.max_iter - 1) out.status = ConicStatus::kMaxIter;
    } catch (const std::runtime_error&) {
      // endgame breakdown (cone departure or factorization failure); fall
      // back to the best iterate recorded so far
      out.status = ConicStatus::kNumerical;
      break;
    }
  }
  residuals();
  if (best.quality < std::max({relgap_, pres_, dres_})) {
    X_ = best.X;
    S_ = best.S;
    xn_ = best.xn;
    sn_ = best.sn;
    uf_ = best.uf;
    y_ = best.y;
    residuals();
  }
  if ((out.status == ConicStatus::kNumerical || out.status == ConicStatus::kMaxIter) &&
      relgap_ < 1e-4 && pres_ < 1e-4 && dres_ < 1e-4)
    out.status = ConicStatus::kOptimal;

  if (dres_ < 1e-7 && dobj_ > best_dual) best_dual = dobj_;
  out.pobj = pobj_;
  out.dobj = dobj_;
  out.dual_bound = (best_dual > -kInf) ? best_dual : dobj_;
  out.gap = relgap_;
  out.prim_res = pres_;
  out.dual_res = dres_;
  out.X = X_;
  out.S = S_;
  if (prob_.num_nonneg > 0)
    out.s_nonneg = xn_.head(prob_.num_nonneg);
  if (nf_) out.u_free = uf_.head(nf_);
  out.y = (y_.array() / row_scale_.array()).matrix();
  return out;
}

}  // namespace

ConicSolution solve_conic(const ConicProblem& prob, ConicOptions opts) {
  Ipm ipm(prob, opts);
  return ipm.run();
}

}  // namespace nodalbid::opt
