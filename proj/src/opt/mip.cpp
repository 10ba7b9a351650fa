#include "nodalbid/opt/mip.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <queue>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace nodalbid::opt {

namespace {

// Bound changes are kept as a parent-shared chain; an entry stores the
// effective (lo, up) of one integer variable at the node that created it.
struct BChange {
  int var;
  double lo, up;
  std::shared_ptr<BChange> parent;
};

struct Node {
  double bound;
  std::shared_ptr<BChange> changes;
  LpBasis basis;
};

struct NodeCmp {
  bool operator()(const Node& a, const Node& b) const { return a.bound > b.bound; }
};

double frac(double v) { return v - std::floor(v); }

class Solver {
 public:
  Solver(const MipProblem& prob, MipOptions opts)
      : prob_(prob), opts_(opts), simplex_(prob.lp, opts.lp) {
    t0_ = std::chrono::steady_clock::now();
    for (size_t k = 0; k < prob_.int_vars.size(); ++k) {
      int j = prob_.int_vars[k];
      is_int_.insert(j);
      prio_[j] = k < prob_.priority.size() ? prob_.priority[k] : 0;
    }
  }

  MipSolution run(const Eigen::VectorXd* start) {
    if (start) try_incumbent_point(*start);

    Eigen::VectorXd root_lo(prob_.lp.num_vars), root_up(prob_.lp.num_vars);
    root_lo = prob_.lp.lb;
    root_up = prob_.lp.ub;
    root_lo_ = root_lo;
    root_up_ = root_up;

    LpSolution root = simplex_.solve();
    if (root.status == LpStatus::kUnbounded)
      throw std::runtime_error("mip: relaxation is unbounded");
    if (root.status == LpStatus::kInfeasible) return finish(-kInf);
    if (root.status == LpStatus::kIterLimit)
      throw std::runtime_error("mip: simplex iteration limit at root");

    std::priority_queue<Node, std::vector<Node>, NodeCmp> open;
    std::multiset<double> open_bounds;
    process_lp_point(root, nullptr, open, open_bounds);

    while (!open.empty()) {
      if (timed_out()) return finish(open_bounds.empty() ? bound_done_ : *open_bounds.begin());
      Node node = open.top();
      open.pop();
      open_bounds.erase(open_bounds.find(node.bound));
      if (prune(node.bound)) continue;
      ++nodes_;
      if (nodes_ > opts_.max_nodes)
        return finish(std::min(node.bound, open_bounds.empty() ? node.bound
                                                               : *open_bounds.begin()));
      apply_node(node.changes);
      LpSolution sol = simplex_.solve_warm(node.basis);
      // never prune on a warm-start verdict alone: a stale basis can make the
      // dual simplex mis-declare infeasibility, so confirm from scratch
      if (sol.status != LpStatus::kOptimal) sol = simplex_.solve();
      if (sol.status == LpStatus::kIterLimit)
        throw std::runtime_error("mip: simplex iteration limit at a node");
      if (sol.status != LpStatus::kOptimal) continue;  // infeasible child
      if (prune(sol.obj)) continue;
      process_lp_point(sol, node.changes, open, open_bounds);
      if (opts_.dive_every > 0 && nodes_ % opts_.dive_every == 1)
        dive(sol, node.changes);
    }
    return finish(has_inc_ ? inc_obj_ : -kInf);
  }

 private:
  bool timed_out() {
    auto dt = std::chrono::steady_clock::now() - t0_;
    return std::chrono::duration<double>(dt).count() > opts_.time_limit;
  }

  bool prune(double bound) const {
    if (!has_inc_) return false;
    double cut = inc_obj_ - std::max(opts_.abs_gap, opts_.rel_gap * std::abs(inc_obj_));
    return bound >= cut;
  }

  // Select the branching variable among fractional integers, or -1 if the
  // point is integral. Highest priority first, then most fractional.
  int pick_branch(const Eigen::VectorXd& x) const {
    int best = -1;
    int best_prio = 0;
    double best_score = 0.0;
    for (int j : prob_.int_vars) {
      double f = frac(x[j]);
      double score = std::min(f, 1.0 - f);
      if (score <= opts_.int_tol) continue;
      int p = prio_.at(j);
      if (best < 0 || p > best_prio || (p == best_prio && score > best_score)) {
        best = j;
        best_prio = p;
        best_score = score;
      }
    }
    return best;
  }

  void accept_incumbent(double obj, const Eigen::VectorXd& x) {
    if (has_inc_ && obj >= inc_obj_ - opts_.abs_gap) return;
    has_inc_ = true;
    inc_obj_ = obj;
    inc_x_ = x;
    for (int j : prob_.int_vars) inc_x_[j] = std::round(inc_x_[j]);
  }

  // Feasibility-check a caller-supplied point with integers rounded.
  void try_incumbent_point(const Eigen::VectorXd& x0) {
    if (x0.size() != prob_.lp.num_vars) return;
    Eigen::VectorXd x = x0;
    const double tol = 1e-6;
    for (int j : prob_.int_vars) x[j] = std::round(x[j]);
    for (int j = 0; j < prob_.lp.num_vars; ++j)
      if (x[j] < prob_.lp.lb[j] - tol || x[j] > prob_.lp.ub[j] + tol) return;
    for (const auto& r : prob_.lp.rows) {
      double a = 0.0;
      for (size_t k = 0; k < r.cols.size(); ++k) a += r.vals[k] * x[r.cols[k]];
      if (a < r.lo - tol || a > r.up + tol) return;
    }
    accept_incumbent(prob_.lp.obj.dot(x) + prob_.lp.obj_offset, x);
  }

  void apply_node(const std::shared_ptr<BChange>& chain) {
    for (int j : prob_.int_vars) simplex_.set_var_bounds(j, root_lo_[j], root_up_[j]);
    std::unordered_set<int> seen;
    for (auto c = chain; c; c = c->parent) {
      if (seen.insert(c->var).second) simplex_.set_var_bounds(c->var, c->lo, c->up);
    }
  }

  // Effective bounds of var under a chain.
  std::pair<double, double> eff_bounds(int j, const std::shared_ptr<BChange>& chain) const {
    for (auto c = chain; c; c = c->parent)
      if (c->var == j) return {c->lo, c->up};
    return {root_lo_[j], root_up_[j]};
  }

  void process_lp_point(const LpSolution& sol, const std::shared_ptr<BChange>& chain,
                        std::priority_queue<Node, std::vector<Node>, NodeCmp>& open,
                        std::multiset<double>& open_bounds) {
    int j = pick_branch(sol.x);
    if (j < 0) {
      accept_incumbent(sol.obj, sol.x);
      return;
    }
    auto [lo, up] = eff_bounds(j, chain);
    double v = sol.x[j];
    double fl = std::floor(v), ce = std::ceil(v);
    // stored bases dominate memory on large frontiers; beyond the cap new
    // nodes re-solve from scratch instead of warm-starting
    const LpBasis& basis = open.size() < 20000 ? sol.basis : empty_basis_;
    if (fl >= lo - 0.5) {
      auto c = std::make_shared<BChange>(BChange{j, lo, fl, chain});
      open.push({sol.obj, c, basis});
      open_bounds.insert(sol.obj);
    }
    if (ce <= up + 0.5) {
      auto c = std::make_shared<BChange>(BChange{j, ce, up, chain});
      open.push({sol.obj, c, basis});
      open_bounds.insert(sol.obj);
    }
  }

  const LpBasis empty_basis_{};

  // Fix-and-resolve dive from an LP point; cheap incumbent generator.
  void dive(LpSolution sol, std::shared_ptr<BChange> chain) {
    int depth = 0;
    const int max_depth = static_cast<int>(prob_.int_vars.size()) + 4;
    while (depth++ < max_depth) {
      int j = pick_branch(sol.x);
      if (j < 0) {
        accept_incumbent(sol.obj, sol.x);
        return;
      }
      if (prune(sol.obj)) return;
      double v = std::round(sol.x[j]);
      auto [lo, up] = eff_bounds(j, chain);
      if (v < lo - 0.5 || v > up + 0.5) return;
      chain = std::make_shared<BChange>(BChange{j, v, v, chain});
      simplex_.set_var_bounds(j, v, v);
      LpSolution next = simplex_.solve_warm(sol.basis);
      if (next.status != LpStatus::kOptimal) return;
      sol = std::move(next);
    }
  }

  MipSolution finish(double open_bound) {
    MipSolution out;
    out.nodes = nodes_;
    out.has_incumbent = has_inc_;
    double bound = has_inc_ ? std::min(open_bound, inc_obj_) : open_bound;
    out.bound = bound;
    if (has_inc_) {
      out.obj = inc_obj_;
      out.x = inc_x_;
      out.gap = inc_obj_ - bound;
      double cut = std::max(opts_.abs_gap, opts_.rel_gap * std::abs(inc_obj_));
      out.status = (out.gap <= cut || bound == inc_obj_) ? MipStatus::kOptimal
                                                         : MipStatus::kFeasible;
    } else {
      out.status = (open_bound == -kInf) ? MipStatus::kInfeasible : MipStatus::kTimeout;
    }
    return out;
  }

  const MipProblem& prob_;
  MipOptions opts_;
  SimplexSolver simplex_;
  Eigen::VectorXd root_lo_, root_up_;
  std::unordered_set<int> is_int_;
  std::unordered_map<int, int> prio_;
  bool has_inc_ = false;
  double inc_obj_ = kInf;
  Eigen::VectorXd inc_x_;
  long nodes_ = 0;
  double bound_done_ = -kInf;
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace

MipSolution solve_mip(const MipProblem& prob, MipOptions opts,
                      const Eigen::VectorXd* start) {
  Solver s(prob, opts);
  return s.run(start);
}

}  // namespace nodalbid::opt
