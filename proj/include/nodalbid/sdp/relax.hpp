#pragma once

#include "nodalbid/opt/conic.hpp"
#include "nodalbid/qcqp/qcqp.hpp"

namespace nodalbid::sdp {

/// A conic program plus the metadata needed to interpret its solution.
struct BuiltSdp {
  opt::ConicProblem problem;
  int dim = 0;     // PSD block dimension (each block for moment problems)
  int blocks = 1;  // number of moment blocks (1 for certificates)
  bool moment = false;
};

/// Certificate over the original variable space: minimize the bound subject
/// to one PSD constraint of dimension n+1, with affine multipliers on the
/// equalities.
BuiltSdp build_full_sdp(const qcqp::QcqpForm& form);

/// Certificate after null-space elimination: PSD constraint of dimension
/// r+1, equality multipliers gone.
BuiltSdp build_reduced_sdp(const qcqp::ReducedForm& rf);

/// Moment relaxation (dual of the reduced certificate): maximize the
/// linearized objective over Y >= 0 with Y_11 = 1, single and pairwise
/// inequality traces, and complementarity trace equalities.
BuiltSdp build_moment_sdp(const qcqp::ReducedForm& rf);

/// One moment block per (t, k) with 1/K objective weights plus ramp and
/// bid-consistency rows linking block first columns.
BuiltSdp build_multi_sdp(const qcqp::MultiQcqp& multi);

struct CertificateResult {
  opt::ConicStatus status = opt::ConicStatus::kNumerical;
  double Lambda = 0.0;
  int iterations = 0;
};

/// Solve a certificate problem (full or reduced) and report the bound.
CertificateResult solve_certificate(const BuiltSdp& sdp, const opt::ConicOptions& opts = {});

struct MomentSolution {
  opt::ConicStatus status = opt::ConicStatus::kNumerical;
  double objective = 0.0;               // relaxation bound
  std::vector<Eigen::MatrixXd> Y;       // per block, dimension (r+1)
  std::vector<Eigen::VectorXd> y;       // extracted first-column candidates
  std::vector<double> rank_ratio;       // sigma_2 / sigma_1 per block (0 when dim 1)
  int iterations = 0;
};

/// Solve a moment problem (single or multi) and extract candidates.
MomentSolution solve_moment(const BuiltSdp& sdp, const opt::ConicOptions& opts = {});

/// First column below the leading entry, rescaled by Y_11. Throws
/// std::runtime_error when Y_11 strays from 1 beyond 1e-6.
Eigen::VectorXd extract_candidate(const Eigen::MatrixXd& Y);

/// Count of singular values above tol * sigma_max.
int numeric_rank(const Eigen::MatrixXd& Y, double tol = 1e-6);

}  // namespace nodalbid::sdp
