#pragma once

#include "covsteer/types.hpp"

#include <stdexcept>
#include <vector>

namespace covsteer {

/// Thrown when A Sigma + Sigma A' + B1 B1' + B X' + X B' = 0 has no solution X,
/// i.e. Sigma is not assignable as a stationary covariance.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StationarySolution {
  Mat K;               // optimal constant gain, u = -K x
  Mat X;               // X = -Sigma K', minimizer over the affine solution set
  double power = 0.0;  // trace(K Sigma K')
  bool hurwitz_ok = false;
};

/// Minimum-power constant gain maintaining problem.Sigma: minimizes
/// trace(K Sigma K') over all X solving the stationary Lyapunov-like equation,
/// by closed-form quadratic minimization over the affine solution set. The
/// minimizer is unique even though X may not be. When the optimum is not
/// Hurwitz (possible when range(B) is not contained in range(B1)) the solution
/// is returned with hurwitz_ok = false; see epsilon_regularized_gain.
StationarySolution optimal_stationary_gain(const StationaryProblem& problem);

struct DualEval {
  double value = 0.0;
  SymMat gradient;  // (A - B B' Pi) Sigma + Sigma (A - B B' Pi)' + B1 B1'
};

/// G(Pi) = trace((A' Pi + Pi A - Pi B B' Pi) Sigma + Pi B1 B1'), the dual of
/// the stationary power minimization, with its gradient over symmetric Pi.
DualEval dual_functional(const SymMat& Pi, const StationaryProblem& problem);

struct PiFamily {
  SymMat particular;               // minimum-norm symmetric Pi with B' Pi = K
  std::vector<SymMat> null_basis;  // orthonormal in the symmetric subspace
};

/// Solves B' Pi = K for symmetric Pi. Throws InfeasibleError when the gain is
/// not realizable as B' Pi for any symmetric Pi.
PiFamily pi_family_from_gain(const Mat& K, const Mat& B);

/// Q such that A' Pi + Pi A - Pi B B' Pi + Q = 0 holds exactly for this Pi.
SymMat willems_q(const SymMat& Pi, const Mat& A, const Mat& B);

struct RegularizedGain {
  Mat K_eps;        // K + eps/2 * B' Sigma^{-1}, certified Hurwitz for eps > 0
  SymMat Sigma_eps; // stationary covariance under K_eps
  double gap = 0.0; // ||Sigma - Sigma_eps||_F, O(eps)
};

/// Requires K to satisfy (A - B K) Sigma + Sigma (A - B K)' + B1 B1' = 0.
RegularizedGain epsilon_regularized_gain(const StationaryProblem& problem, const Mat& K,
                                         double epsilon);

/// Filter d xi = (A - B K_f) xi dt + B dw, dy = -K_f xi dt + dw whose state
/// shares the stationary covariance Sigma of dx = A x dt + B dy. Requires A
/// Hurwitz and A Sigma + Sigma A' + B X' + X B' = 0 solvable.
struct StationaryRealization {
  Mat state_matrix;  // A - B K_f
  Mat input_matrix;  // B
  Mat output_gain;   // -K_f
  Mat K_f;           // (1/2) B' Sigma^{-1} - X' Sigma^{-1}
  Mat X;
};

StationaryRealization stationary_external_realization(const Mat& A, const Mat& B,
                                                      const SymMat& Sigma);

}  // namespace covsteer
