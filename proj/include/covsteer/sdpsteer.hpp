#pragma once

#include "covsteer/types.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace covsteer {

/// Trapezoidal collocation of the steering dynamics on a uniform grid. Per
/// node k the variables are Sigma_k (n x n), U_k (n x m) and the epigraph
/// block Y_k (m x m); Sigma_0 and Sigma_N are pinned to the boundary data and
/// every Sigma_k carries a strict margin eps_psd * I inside the node LMI.
struct DiscretizedProblem {
  SteeringProblem problem;
  int N = 0;
  double dt = 0.0;
  std::vector<double> grid;
  double eps_psd = 0.0;
};

DiscretizedProblem discretize(const SteeringProblem& problem, int N);

/// Linear objective + affine equalities + product of PSD blocks, over the
/// scaled-vectorization coordinates of the blocks (off-diagonal entries carry
/// sqrt(2) so Frobenius inner products are plain dot products).
struct ConicProgram {
  std::vector<int> block_dims;
  std::vector<int> block_offsets;
  int dim = 0;
  Eigen::SparseMatrix<double> E;
  Vec f;
  Vec c;
};

/// One (m+n) x (m+n) PSD block per node stacking [[Y_k, U_k'], [U_k,
/// Sigma_k - eps_psd I]]; objective sum_k w_k trace(Y_k) with trapezoidal
/// weights.
ConicProgram assemble_sdp(const DiscretizedProblem& dp);

enum class SolverStatus { kOptimal, kMaxIters, kInfeasibleSuspected };

struct SolverOptions {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iters = 50000;
  double rho = 1.0;
  double over_relaxation = 1.6;
  bool adaptive_rho = true;
};

struct SdpSolution {
  SolverStatus status = SolverStatus::kMaxIters;
  std::vector<Mat> blocks;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
};

/// ADMM splitting between the affine subspace E z = f (cached sparse LDLT of
/// E E') and the PSD cone (per-block eigendecomposition), over-relaxed.
/// Deterministic given inputs.
SdpSolution solve_sdp(const ConicProgram& cp, const SolverOptions& opts = {});

/// Same solver warm-started from the given PSD blocks.
SdpSolution solve_sdp_warm(const ConicProgram& cp, const SolverOptions& opts,
                           const std::vector<Mat>& z_init);

struct NodeVariables {
  SymMat Sigma;  // with the eps_psd margin added back
  Mat U;
  SymMat Y;
};

NodeVariables node_variables(const SdpSolution& sol, const DiscretizedProblem& dp, int k);

/// K_k = -U_k' Sigma_k^{-1} per node, interpolated piecewise-linearly.
/// Throws naming the node when some Sigma_k is numerically singular.
FeedbackPolicy recover_gains(const SdpSolution& sol, const DiscretizedProblem& dp);

struct SteeringReport {
  double terminal_error = 0.0;  // ||Sigma(T) - SigmaT||_F
  double realized_cost = 0.0;   // integral of trace(K Sigma K')
  std::vector<double> grid;
  std::vector<SymMat> Sigma;
};

/// Propagates the closed loop on a 4x finer grid and reports the terminal
/// covariance error and the realized control energy.
SteeringReport verify_steering(const FeedbackPolicy& policy, const SteeringProblem& problem);

}  // namespace covsteer
