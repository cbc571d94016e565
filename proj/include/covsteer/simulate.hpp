#pragma once

#include "covsteer/types.hpp"

#include <cstdint>
#include <vector>

namespace covsteer {

/// Counter-based standard normal keyed on (seed, path, step, index):
/// Box-Muller over SplitMix64 output, identical under any execution order.
double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                      std::uint64_t index);

struct SimConfig {
  double dt = 1e-3;
  int n_paths = 20000;
  std::uint64_t seed = 0;
  bool store_paths = false;
  int store_paths_limit = 16;  // first paths recorded when store_paths is set
};

/// Per-time empirical first and second moments. The covariance uses raw
/// second moments (the zero-mean convention of the model).
struct EnsembleStats {
  std::vector<double> grid;
  std::vector<Vec> mean;
  std::vector<SymMat> cov;
  int n_paths = 0;
};

struct StoredPath {
  int path_index = 0;
  std::vector<Vec> states;    // at every grid time
  std::vector<Vec> controls;  // u = -K x at every step (size grid-1)
};

struct EnsembleResult {
  EnsembleStats stats;
  std::vector<StoredPath> paths;
  Mat final_states;  // n x n_paths, for chaining phases
};

/// Euler-Maruyama x_{k+1} = x_k + (A - B K(t_k)) x_k dt + B1 sqrt(dt) xi_k on
/// [t0, t0+T], x(t0) ~ N(0, Sigma0) drawn via Cholesky (eigendecomposition
/// fallback for semidefinite Sigma0). Noise streams are derived per (seed,
/// path, step) so results do not depend on scheduling. step_offset shifts the
/// step counter so chained phases draw fresh noise.
EnsembleResult euler_maruyama_ensemble(const Mat& A, const Mat& B, const Mat& B1,
                                       const FeedbackPolicy& policy, const SymMat& Sigma0,
                                       double T, const SimConfig& config, double t0 = 0.0,
                                       std::uint64_t step_offset = 0);

/// Same scheme continuing from explicit initial states (n x n_paths).
EnsembleResult euler_maruyama_ensemble_from_states(const Mat& A, const Mat& B, const Mat& B1,
                                                   const FeedbackPolicy& policy,
                                                   const Mat& initial_states, double t0, double T,
                                                   const SimConfig& config,
                                                   std::uint64_t step_offset = 0);

struct CovarianceEstimate {
  SymMat cov;
  Mat se;  // entrywise standard errors, Gaussian fourth-moment formula
  int n_paths = 0;
};

/// Estimate at a grid time (throws when t is not a grid node).
CovarianceEstimate empirical_covariance(const EnsembleStats& stats, double t);

/// Estimate from raw states (n x n_paths).
CovarianceEstimate empirical_covariance(const Mat& states);

struct ComparisonReport {
  double frobenius_gap = 0.0;
  Mat z_scores;
  bool pass = false;  // max |z| <= 3.5
};

ComparisonReport compare_covariance(const SymMat& Sigma_hat, const SymMat& Sigma_target,
                                    int n_paths);

}  // namespace covsteer
