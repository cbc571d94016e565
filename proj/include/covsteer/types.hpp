#pragma once

#include "covsteer/matops.hpp"

#include <vector>

namespace covsteer {

/// Finite-horizon covariance steering data: steer the state covariance of
/// dx = A x dt + B u dt + B1 dw from Sigma0 at t=0 to SigmaT at t=T.
struct SteeringProblem {
  Mat A;
  Mat B;
  Mat B1;
  double T = 0.0;
  SymMat Sigma0;
  SymMat SigmaT;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return B1.cols(); }

  /// Throws std::invalid_argument on dimension mismatch, T <= 0, or
  /// non-positive-definite boundary covariances.
  void validate() const;
};

/// Stationary maintenance data: hold Sigma as the stationary covariance of
/// dx = (A - B K) x dt + B1 dw with constant K.
struct StationaryProblem {
  Mat A;
  Mat B;
  Mat B1;
  SymMat Sigma;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }

  void validate() const;
};

/// Sampled covariance trajectory Sigma(t) with the auxiliary input
/// U(t) = -Sigma(t) K(t)' of the linear-in-(Sigma, U) dynamics.
struct CovariancePath {
  std::vector<double> grid;
  std::vector<SymMat> Sigma;
  std::vector<Mat> U;
};

/// Feedback gain trajectory with the convention u = -K(t) x. A constant
/// policy holds a single gain; a sampled policy interpolates linearly in t
/// between its grid nodes (clamped outside the grid).
class FeedbackPolicy {
 public:
  FeedbackPolicy() = default;

  static FeedbackPolicy Constant(const Mat& K);
  static FeedbackPolicy Sampled(std::vector<double> grid, std::vector<Mat> gains);

  Mat at(double t) const;
  bool is_constant() const { return constant_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<Mat>& gains() const { return gains_; }

 private:
  bool constant_ = true;
  std::vector<double> grid_;
  std::vector<Mat> gains_;
};

/// Uniform grid 0 = t_0 < ... < t_N = T.
std::vector<double> uniform_grid(double T, int N);

}  // namespace covsteer
