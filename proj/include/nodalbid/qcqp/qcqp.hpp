#pragma once

#include <iosfwd>
#include <vector>

#include "nodalbid/market/dispatch.hpp"

namespace nodalbid::qcqp {

/// Index map of the stacked MPEC variable
///   x = [strategic bids | P_G | P_D | lambda | sigma | delta | zeta | xi |
///        phi | psi | theta].
struct VariableLayout {
  int S = 0, G = 0, D = 0, N = 0, Lf = 0;
  int n = 0;

  static VariableLayout from_case(const market::MarketCase& c);

  int bid(int s) const { return s; }
  int P_G(int g) const { return S + g; }
  int P_D(int d) const { return S + G + d; }
  int lambda(int b) const { return S + G + D + b; }
  int sigma(int g) const { return S + G + D + N + g; }
  int delta(int g) const { return S + G + D + N + G + g; }
  int zeta(int d) const { return S + 3 * G + D + N + d; }
  int xi(int d) const { return S + 3 * G + 2 * D + N + d; }
  int phi(int i) const { return S + 3 * G + 3 * D + N + i; }
  int psi(int i) const { return S + 3 * G + 3 * D + N + Lf + i; }
  int theta(int b) const { return S + 3 * G + 3 * D + N + 2 * Lf + b; }

  /// (name, length) per segment, in stacking order — for census printouts.
  std::vector<std::pair<std::string, int>> census() const;

  /// Stack a dispatch solution plus the strategic bids into x.
  Eigen::VectorXd stack(const market::MarketCase& c, const Eigen::VectorXd& strategic_bids,
                        const market::DispatchSolution& sol) const;
};

/// One complementarity (u^T x + u0)(w^T x + w0) = 0. u is always the bare
/// dual-variable factor (u0 = 0); w is the affine primal slack.
struct ComplementarityPair {
  Eigen::VectorXd u;
  double u0 = 0.0;
  Eigen::VectorXd w;
  double w0 = 0.0;

  double value(const Eigen::VectorXd& x) const {
    return (u.dot(x) + u0) * (w.dot(x) + w0);
  }
  /// Non-symmetric outer-product form Q = w u^T, so that
  /// x^T Q x + 2 q^T x + u0 w0 reproduces value(x).
  Eigen::MatrixXd Q() const { return w * u.transpose(); }
  Eigen::VectorXd q() const { return 0.5 * w0 * u; }
  /// Q = d q^T; defined only when the slack offset w0 is nonzero.
  Eigen::VectorXd d() const;
};

struct LinearTerm {
  Eigen::VectorXd p;
  double p0 = 0.0;
  double value(const Eigen::VectorXd& x) const { return p.dot(x) + p0; }
};

/// max x^T F x + 2 f^T x  s.t.  p_i^T x + p_i0 >= 0, v_m^T x + v_m0 = 0,
/// and the complementarity products zero.
struct QcqpForm {
  VariableLayout layout;
  Eigen::MatrixXd F;
  Eigen::VectorXd f;
  std::vector<LinearTerm> ineqs;
  std::vector<LinearTerm> eqs;
  std::vector<ComplementarityPair> comps;

  double objective(const Eigen::VectorXd& x) const {
    return x.dot(F * x) + 2.0 * f.dot(x);
  }
  /// Max violation over all three constraint families at x.
  double residual(const Eigen::VectorXd& x) const;
};

QcqpForm assemble_qcqp(const market::MarketCase& c, const Eigen::VectorXd* fixed_bids,
                       int slot = 1, int scenario = 1);
inline QcqpForm assemble_qcqp(const market::MarketCase& c, int slot = 1, int scenario = 1) {
  return assemble_qcqp(c, nullptr, slot, scenario);
}

/// Equality-eliminated form: x = O y + xbar with O^T O = I_r and every
/// equality satisfied identically.
struct ReducedForm {
  QcqpForm parent;
  Eigen::MatrixXd O;     // n x r, orthonormal columns spanning Null(V)
  Eigen::VectorXd xbar;  // minimum-norm particular solution
  int r = 0;

  // substituted data: objective y^T F_r y + 2 f_r^T y + c_r, inequalities
  // (p, p0) in y, complementarity factors (u, u0, w, w0) in y
  Eigen::MatrixXd F_r;
  Eigen::VectorXd f_r;
  double c_r = 0.0;
  std::vector<LinearTerm> ineqs;
  std::vector<ComplementarityPair> comps;

  Eigen::VectorXd lift(const Eigen::VectorXd& y) const;
  Eigen::VectorXd project(const Eigen::VectorXd& x) const { return O.transpose() * (x - xbar); }
};

/// Null-space elimination of the linear equalities (SVD, relative singular
/// value cutoff 1e-9). Throws std::runtime_error when the equality system is
/// inconsistent.
ReducedForm reduce(const QcqpForm& form);

/// Linear constraint across blocks: sum coef * x_block[index] + offset
/// (= 0 when equality, >= 0 otherwise).
struct CouplingTerm {
  int block = 0;
  int index = 0;
  double coef = 0.0;
};
struct Coupling {
  std::vector<CouplingTerm> terms;
  double offset = 0.0;
  bool equality = false;
};

/// T x K copies of the single-cell problem plus ramp and bid-consistency
/// coupling. Block (t, k) sits at index (t-1)*K + (k-1); all blocks share
/// the same layout and null-space basis O.
struct MultiQcqp {
  market::MarketCase c;
  int T = 1, K = 1;
  double weight = 1.0;  // 1/K applied to each block objective
  std::vector<ReducedForm> blocks;
  std::vector<Coupling> couplings;

  int block_index(int t, int k) const { return (t - 1) * K + (k - 1); }
  const VariableLayout& layout() const { return blocks.front().parent.layout; }
  /// Expected strategic profit of per-block stacked vectors.
  double objective(const std::vector<Eigen::VectorXd>& x) const;
  double coupling_residual(const std::vector<Eigen::VectorXd>& x) const;
};

/// Uses c.horizon as T and c.scenarios as the K-point scenario set.
MultiQcqp assemble_multi(const market::MarketCase& c, const Eigen::VectorXd* fixed_bids = nullptr);

/// Text dump of all matrices of a reduced form (named-matrix archive).
void dump_archive(const ReducedForm& rf, std::ostream& out);

}  // namespace nodalbid::qcqp
