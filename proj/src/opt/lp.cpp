#include "nodalbid/opt/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace nodalbid::opt {

int LinearProgram::add_var(double lo, double hi, double cost) {
  const int id = num_vars++;
  lb.conservativeResize(num_vars);
  ub.conservativeResize(num_vars);
  obj.conservativeResize(num_vars);
  lb[id] = lo;
  ub[id] = hi;
  obj[id] = cost;
  return id;
}

LpRow& LinearProgram::add_row(double lo, double hi) {
  rows.emplace_back();
  rows.back().lo = lo;
  rows.back().up = hi;
  return rows.back();
}

namespace {

struct Eta {
  int r;
  Eigen::VectorXd w;
};

}  // namespace

struct SimplexSolver::Impl {
  LpOptions opts;
  int n = 0;  // structural
  int m = 0;  // rows
  int N = 0;  // n + m columns

  // CCS of structural columns.
  std::vector<int> colptr, rowidx;
  std::vector<double> colval;

  Eigen::VectorXd cost;    // length N
  Eigen::VectorXd lo, up;  // length N
  Eigen::VectorXd xval;    // length N
  std::vector<int> basic;  // length m
  std::vector<VarStatus> vstat;
  std::vector<int> basic_pos;  // column -> basic row, or -1

  // mutable: SparseLU::transpose() is non-const in Eigen though logically const
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  std::vector<Eta> etas;
  bool factor_ok = false;
  int iters = 0;
  int degen_count = 0;
  bool bland = false;

  double obj_offset = 0.0;

  explicit Impl(const LinearProgram& lp, LpOptions o) : opts(o) {
    obj_offset = lp.obj_offset;
    n = lp.num_vars;
    m = static_cast<int>(lp.rows.size());
    N = n + m;
    cost.setZero(N);
    cost.head(n) = lp.obj;
    lo.setConstant(N, -kInf);
    up.setConstant(N, kInf);
    lo.head(n) = lp.lb;
    up.head(n) = lp.ub;
    for (int i = 0; i < m; ++i) {
      lo[n + i] = lp.rows[i].lo;
      up[n + i] = lp.rows[i].up;
    }
    // Build CCS from rows.
    std::vector<int> cnt(n, 0);
    for (const auto& r : lp.rows)
      for (int c : r.cols) cnt[c]++;
    colptr.assign(n + 1, 0);
    for (int j = 0; j < n; ++j) colptr[j + 1] = colptr[j] + cnt[j];
    rowidx.resize(colptr[n]);
    colval.resize(colptr[n]);
    std::vector<int> fill(colptr.begin(), colptr.end() - 1);
    for (int i = 0; i < m; ++i) {
      const auto& r = lp.rows[i];
      for (size_t k = 0; k < r.cols.size(); ++k) {
        int j = r.cols[k];
        rowidx[fill[j]] = i;
        colval[fill[j]] = r.vals[k];
        fill[j]++;
      }
    }
    xval.setZero(N);
    basic_pos.assign(N, -1);
  }

  double col_dot(int j, const Eigen::VectorXd& y) const {
    if (j >= n) return -y[j - n];
    double s = 0.0;
    for (int k = colptr[j]; k < colptr[j + 1]; ++k) s += colval[k] * y[rowidx[k]];
    return s;
  }

  void scatter_col(int j, double scale, Eigen::VectorXd& v) const {
    if (j >= n) {
      v[j - n] -= scale;
      return;
    }
    for (int k = colptr[j]; k < colptr[j + 1]; ++k) v[rowidx[k]] += scale * colval[k];
  }

  // Factorize the current basis; on singularity fall back to the all-slack
  // basis (always nonsingular) and let phase 1 recover feasibility.
  void factor_or_reset() {
    if (refactorize()) return;
    set_default_basis();
    if (!refactorize()) throw std::runtime_error("simplex: singular slack basis");
  }

  void set_default_basis() {
    basic.resize(m);
    basic_pos.assign(N, -1);
    vstat.assign(N, VarStatus::kAtLower);
    for (int j = 0; j < n; ++j) {
      if (std::isfinite(lo[j]))
        vstat[j] = VarStatus::kAtLower;
      else if (std::isfinite(up[j]))
        vstat[j] = VarStatus::kAtUpper;
      else
        vstat[j] = VarStatus::kNonbasicFree;
    }
    for (int i = 0; i < m; ++i) {
      basic[i] = n + i;
      basic_pos[n + i] = i;
      vstat[n + i] = VarStatus::kBasic;
    }
  }

  bool refactorize() {
    etas.clear();
    Eigen::SparseMatrix<double> B(m, m);
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < m; ++i) {
      int j = basic[i];
      if (j >= n) {
        trips.emplace_back(j - n, i, -1.0);
      } else {
        for (int k = colptr[j]; k < colptr[j + 1]; ++k)
          trips.emplace_back(rowidx[k], i, colval[k]);
      }
    }
    B.setFromTriplets(trips.begin(), trips.end());
    B.makeCompressed();
    lu.compute(B);
    factor_ok = (lu.info() == Eigen::Success);
    return factor_ok;
  }

  void ftran(Eigen::VectorXd& v) const {
    v = lu.solve(v);
    for (const auto& e : etas) {
      double t = v[e.r] / e.w[e.r];
      if (t != 0.0) {
        v -= t * e.w;
        v[e.r] = t;
      } else {
        v[e.r] = 0.0;
      }
    }
  }

  // Solve B^T v = rhs in place; etas transpose-applied newest first.
  void btran(Eigen::VectorXd& v) const {
    for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
      double s = it->w.dot(v) - v[it->r];
      v[it->r] -= s / it->w[it->r];
    }
    v = lu.transpose().solve(v);
  }

  void compute_basic_values() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < N; ++j) {
      if (vstat[j] == VarStatus::kBasic) continue;
      double v = nonbasic_value(j);
      xval[j] = v;
      if (v != 0.0) scatter_col(j, -v, rhs);
    }
    ftran(rhs);
    for (int i = 0; i < m; ++i) xval[basic[i]] = rhs[i];
  }

  double nonbasic_value(int j) const {
    switch (vstat[j]) {
      case VarStatus::kAtLower:
        return lo[j];
      case VarStatus::kAtUpper:
        return up[j];
      default:
        return 0.0;
    }
  }

  double infeas_of(int j) const {
    double v = xval[j];
    if (v < lo[j] - opts.feas_tol) return lo[j] - v;
    if (v > up[j] + opts.feas_tol) return v - up[j];
    return 0.0;
  }

  double total_infeas() const {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += infeas_of(basic[i]);
    return s;
  }

  // Entering column for the current (possibly phase-1) cost vector.
  // Returns -1 if none.
  int price(const Eigen::VectorXd& y, const Eigen::VectorXd& c, int* dir) const {
    int best = -1;
    double best_score = opts.opt_tol;
    int bdir = 0;
    for (int j = 0; j < N; ++j) {
      if (vstat[j] == VarStatus::kBasic) continue;
      double d = c[j] - col_dot(j, y);
      double score = 0.0;
      int sd = 0;
      if (vstat[j] == VarStatus::kAtLower && d < -opts.opt_tol) {
        score = -d;
        sd = +1;
      } else if (vstat[j] == VarStatus::kAtUpper && d > opts.opt_tol) {
        score = d;
        sd = -1;
      } else if (vstat[j] == VarStatus::kNonbasicFree && std::abs(d) > opts.opt_tol) {
        score = std::abs(d);
        sd = d < 0 ? +1 : -1;
      }
      if (score > best_score) {
        best_score = score;
        best = j;
        bdir = sd;
        if (bland) break;
      }
    }
    *dir = bdir;
    return best;
  }

  struct Ratio {
    double t = kInf;
    int pos = -1;        // basic position, or -1 for entering-bound flip
    double to_bound = 0; // value the leaving basic ends at
    bool leave_upper = false;
  };

  // Ratio test: entering j moves by sdir * t, basics move by -sdir * w.
  // phase1 allows infeasible basics to run until the violated bound.
  Ratio ratio_test(int j, int sdir, const Eigen::VectorXd& w, bool phase1) const {
    Ratio best;
    // entering's own range
    double range = up[j] - lo[j];
    if (std::isfinite(range)) best.t = range;
    const double piv_tol = 1e-9;
    double best_piv = 0.0;
    for (int i = 0; i < m; ++i) {
      double delta = -sdir * w[i];  // change of basic i per unit t
      if (std::abs(delta) <= piv_tol) continue;
      int b = basic[i];
      double v = xval[b];
      double t = kInf;
      double tob = 0.0;
      bool lup = false;
      if (phase1 && v < lo[b] - opts.feas_tol) {
        if (delta > 0) {
          t = (lo[b] - v) / delta;
          tob = lo[b];
        }
      } else if (phase1 && v > up[b] + opts.feas_tol) {
        if (delta < 0) {
          t = (up[b] - v) / delta;
          tob = up[b];
          lup = true;
        }
      } else {
        if (delta < 0 && std::isfinite(lo[b])) {
          t = (lo[b] - v) / delta;
          tob = lo[b];
        } else if (delta > 0 && std::isfinite(up[b])) {
          t = (up[b] - v) / delta;
          tob = up[b];
          lup = true;
        }
      }
      if (t == kInf) continue;
      if (t < -opts.feas_tol) t = 0.0;
      t = std::max(t, 0.0);
      // Harris-lite: prefer larger pivots among near ties.
      if (t < best.t - 1e-10 ||
          (t < best.t + 1e-10 && std::abs(delta) > best_piv)) {
        best.t = t;
        best.pos = i;
        best.to_bound = tob;
        best.leave_upper = lup;
        best_piv = std::abs(delta);
      }
    }
    return best;
  }

  void apply_pivot(int j, int sdir, double t, const Ratio& r,
                   const Eigen::VectorXd& w) {
    if (r.pos < 0) {
      // bound flip of the entering variable
      vstat[j] = (sdir > 0) ? VarStatus::kAtUpper : VarStatus::kAtLower;
      compute_basic_values_incremental(w, sdir, t, j);
      xval[j] = nonbasic_value(j);
      return;
    }
    int leave = basic[r.pos];
    // update values
    for (int i = 0; i < m; ++i) xval[basic[i]] += -sdir * w[i] * t;
    xval[j] += sdir * t;
    xval[leave] = r.to_bound;
    vstat[leave] = r.leave_upper ? VarStatus::kAtUpper : VarStatus::kAtLower;
    if (!std::isfinite(r.to_bound)) vstat[leave] = VarStatus::kNonbasicFree;
    basic_pos[leave] = -1;
    basic[r.pos] = j;
    basic_pos[j] = r.pos;
    vstat[j] = VarStatus::kBasic;
    etas.push_back({r.pos, w});
    if (static_cast<int>(etas.size()) >= opts.refactor_every) {
      factor_or_reset();
      compute_basic_values();
    }
    if (t <= opts.feas_tol) {
      if (++degen_count > 300) bland = true;
    } else {
      degen_count = 0;
      bland = false;
    }
  }

  void compute_basic_values_incremental(const Eigen::VectorXd& w, int sdir,
                                        double t, int /*j*/) {
    for (int i = 0; i < m; ++i) xval[basic[i]] += -sdir * w[i] * t;
  }

  // Primal simplex on the current basis; handles phase 1 and 2.
  LpStatus primal_loop() {
    compute_basic_values();
    Eigen::VectorXd c1(N), y(m);
    while (iters < opts.max_iter) {
      ++iters;
      bool phase1 = total_infeas() > opts.feas_tol * (1.0 + m);
      const Eigen::VectorXd* cp = &cost;
      if (phase1) {
        c1.setZero();
        for (int i = 0; i < m; ++i) {
          int b = basic[i];
          if (xval[b] < lo[b] - opts.feas_tol)
            c1[b] = -1.0;
          else if (xval[b] > up[b] + opts.feas_tol)
            c1[b] = 1.0;
        }
        cp = &c1;
      }
      y.setZero();
      for (int i = 0; i < m; ++i) y[i] = (*cp)[basic[i]];
      btran(y);
      int dir = 0;
      int j = price(y, *cp, &dir);
      if (j < 0) {
        if (phase1) return LpStatus::kInfeasible;
        return LpStatus::kOptimal;
      }
      Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
      scatter_col(j, 1.0, w);
      ftran(w);
      Ratio r = ratio_test(j, dir, w, phase1);
      if (r.t == kInf) {
        if (phase1) {
          // should not happen: phase-1 objective is bounded below
          return LpStatus::kInfeasible;
        }
        return LpStatus::kUnbounded;
      }
      apply_pivot(j, dir, r.t, r, w);
    }
    return LpStatus::kIterLimit;
  }

  // Dual simplex; requires dual-feasible start. Returns kOptimal when
  // primal feasibility is reached (caller then polishes with primal_loop),
  // kInfeasible when a violated row admits no entering column.
  LpStatus dual_loop() {
    compute_basic_values();
    Eigen::VectorXd y(m), rho(m);
    while (iters < opts.max_iter) {
      ++iters;
      int rpos = -1;
      double worst = opts.feas_tol * 10;
      bool below = false;
      for (int i = 0; i < m; ++i) {
        int b = basic[i];
        double v = xval[b];
        if (lo[b] - v > worst) {
          worst = lo[b] - v;
          rpos = i;
          below = true;
        }
        if (v - up[b] > worst) {
          worst = v - up[b];
          rpos = i;
          below = false;
        }
      }
      if (rpos < 0) return LpStatus::kOptimal;
      // reduced costs for the true objective
      y.setZero();
      for (int i = 0; i < m; ++i) y[i] = cost[basic[i]];
      btran(y);
      rho.setZero();
      rho[rpos] = 1.0;
      btran(rho);
      int leave = basic[rpos];
      int enter = -1;
      double best_ratio = kInf;
      double best_alpha = 0.0;
      for (int j = 0; j < N; ++j) {
        if (vstat[j] == VarStatus::kBasic) continue;
        double alpha = col_dot(j, rho);
        if (std::abs(alpha) < 1e-9) continue;
        bool ok;
        if (below) {
          // need basic to increase: delta_xB[r] = -alpha * dj, dj sign per status
          ok = (vstat[j] == VarStatus::kAtLower && alpha < 0) ||
               (vstat[j] == VarStatus::kAtUpper && alpha > 0) ||
               (vstat[j] == VarStatus::kNonbasicFree);
        } else {
          ok = (vstat[j] == VarStatus::kAtLower && alpha > 0) ||
               (vstat[j] == VarStatus::kAtUpper && alpha < 0) ||
               (vstat[j] == VarStatus::kNonbasicFree);
        }
        if (!ok) continue;
        double d = cost[j] - col_dot(j, y);
        double ratio = std::abs(d) / std::abs(alpha);
        if (ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && std::abs(alpha) > std::abs(best_alpha))) {
          best_ratio = ratio;
          best_alpha = alpha;
          enter = j;
        }
      }
      if (enter < 0) return LpStatus::kInfeasible;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
      scatter_col(enter, 1.0, w);
      ftran(w);
      double alpha = w[rpos];
      if (std::abs(alpha) < 1e-10) {
        // numerical breakdown: refactorize and retry once, else bail to primal
        factor_or_reset();
        compute_basic_values();
        return LpStatus::kIterLimit;
      }
      double target = below ? lo[leave] : up[leave];
      double delta_enter = (xval[leave] - target) / alpha;
      for (int i = 0; i < m; ++i) xval[basic[i]] -= w[i] * delta_enter;
      xval[enter] = nonbasic_value(enter) + delta_enter;
      xval[leave] = target;
      vstat[leave] = below ? VarStatus::kAtLower : VarStatus::kAtUpper;
      basic_pos[leave] = -1;
      basic[rpos] = enter;
      basic_pos[enter] = rpos;
      vstat[enter] = VarStatus::kBasic;
      etas.push_back({rpos, w});
      if (static_cast<int>(etas.size()) >= opts.refactor_every) {
        factor_or_reset();
        compute_basic_values();
      }
    }
    return LpStatus::kIterLimit;
  }

  LpSolution extract(LpStatus st) {
    LpSolution sol;
    sol.status = st;
    sol.iterations = iters;
    sol.x = xval.head(n);
    sol.row_act = xval.tail(m);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) y[i] = cost[basic[i]];
    btran(y);
    sol.row_dual = y;
    sol.red_cost.resize(n);
    for (int j = 0; j < n; ++j) sol.red_cost[j] = cost[j] - col_dot(j, y);
    sol.obj = cost.head(n).dot(sol.x) + obj_offset;
    sol.basis.basic = basic;
    sol.basis.vstat = vstat;
    return sol;
  }

  LpSolution run_cold() {
    iters = 0;  // per-solve budget; one solver serves many node re-solves
    degen_count = 0;
    bland = false;
    set_default_basis();
    for (int i = 0; i < m; ++i) basic_pos[n + i] = i;
    if (!refactorize()) throw std::runtime_error("simplex: singular start basis");
    LpStatus st = primal_loop();
    return extract(st);
  }

  LpSolution run_warm(const LpBasis& start) {
    iters = 0;
    degen_count = 0;
    bland = false;
    basic = start.basic;
    vstat = start.vstat;
    basic_pos.assign(N, -1);
    for (int i = 0; i < m; ++i) basic_pos[basic[i]] = i;
    // snap nonbasic values to (possibly changed) bounds
    for (int j = 0; j < N; ++j) {
      if (vstat[j] == VarStatus::kBasic) continue;
      if (vstat[j] == VarStatus::kAtLower && !std::isfinite(lo[j]))
        vstat[j] = std::isfinite(up[j]) ? VarStatus::kAtUpper : VarStatus::kNonbasicFree;
      if (vstat[j] == VarStatus::kAtUpper && !std::isfinite(up[j]))
        vstat[j] = std::isfinite(lo[j]) ? VarStatus::kAtLower : VarStatus::kNonbasicFree;
    }
    for (int j = 0; j < N; ++j)
      if (lo[j] > up[j] + 1e-12) return infeasible_now();
    if (!refactorize()) return run_cold();
    LpStatus st = dual_loop();
    if (st == LpStatus::kInfeasible) return extract(st);
    // polish / finish with primal
    st = primal_loop();
    return extract(st);
  }

  LpSolution infeasible_now() {
    LpSolution sol;
    sol.status = LpStatus::kInfeasible;
    sol.x = xval.head(n);
    return sol;
  }
};

SimplexSolver::SimplexSolver(const LinearProgram& lp, LpOptions opts)
    : impl_(new Impl(lp, opts)) {}

SimplexSolver::~SimplexSolver() { delete impl_; }

LpSolution SimplexSolver::solve() { return impl_->run_cold(); }

LpSolution SimplexSolver::solve_warm(const LpBasis& start) {
  if (!start.valid()) return impl_->run_cold();
  return impl_->run_warm(start);
}

void SimplexSolver::set_var_bounds(int var, double lo, double hi) {
  impl_->lo[var] = lo;
  impl_->up[var] = hi;
}

LpSolution solve_lp(const LinearProgram& lp, LpOptions opts) {
  SimplexSolver s(lp, opts);
  return s.solve();
}

}  // namespace nodalbid::opt
