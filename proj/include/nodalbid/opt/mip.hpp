#pragma once

#include <optional>
#include <vector>

#include "nodalbid/opt/lp.hpp"

namespace nodalbid::opt {

enum class MipStatus { kOptimal, kFeasible, kInfeasible, kTimeout };

/// min c^T x with a subset of variables restricted to integers.
struct MipProblem {
  LinearProgram lp;
  std::vector<int> int_vars;
  /// Optional branching priority per entry of int_vars; larger branches first.
  std::vector<int> priority;
};

struct MipOptions {
  double int_tol = 1e-6;
  double abs_gap = 1e-9;
  double rel_gap = 1e-6;
  double time_limit = kInf;  // seconds
  long max_nodes = 50'000'000;
  int dive_every = 64;  // run the diving heuristic at this node interval
  LpOptions lp;
};

struct MipSolution {
  MipStatus status = MipStatus::kInfeasible;
  double obj = 0.0;    // incumbent objective (valid unless kInfeasible/kTimeout w/o incumbent)
  double bound = -kInf;  // proven lower bound on the optimum
  double gap = kInf;
  Eigen::VectorXd x;
  long nodes = 0;
  bool has_incumbent = false;
};

/// Best-first branch and bound over the bounded-variable simplex with
/// warm-started node re-solves. An optional starting point is used as an
/// initial incumbent after feasibility checking.
MipSolution solve_mip(const MipProblem& prob, MipOptions opts = {},
                      const Eigen::VectorXd* start = nullptr);

}  // namespace nodalbid::opt
