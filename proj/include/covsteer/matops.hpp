#pragma once

#include <Eigen/Dense>

#include <vector>

namespace covsteer {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Eigenvalues with real part >= -kHurwitzTol are treated as unstable.
inline constexpr double kHurwitzTol = 1e-9;

/// Relative singular-value threshold for rank decisions: max(rows, cols) * sigma_max * kRankRelTol.
inline constexpr double kRankRelTol = 1e-12;

/// Relative asymmetry allowed when constructing a SymMat.
inline constexpr double kSymTol = 1e-12;

Mat symmetrized(const Mat& m);

/// Square real matrix kept exactly symmetric. Construction symmetrizes the
/// input and rejects matrices whose asymmetry exceeds
/// kSymTol * (1 + max |entry|).
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(const Mat& m);

  const Mat& mat() const { return m_; }
  operator const Mat&() const { return m_; }

  Eigen::Index rows() const { return m_.rows(); }
  Eigen::Index cols() const { return m_.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  double min_eigenvalue() const;
  bool is_positive_definite() const { return min_eigenvalue() > 0.0; }

  static SymMat Zero(Eigen::Index n) { return SymMat(Mat::Zero(n, n)); }
  static SymMat Identity(Eigen::Index n) { return SymMat(Mat::Identity(n, n)); }

 private:
  Mat m_;
};

/// Rank by singular values, threshold max(rows, cols) * sigma_max * kRankRelTol.
Eigen::Index matrix_rank(const Mat& m);

/// [B, AB, ..., A^{n-1}B].
Mat controllability_matrix(const Mat& A, const Mat& B);

bool is_controllable(const Mat& A, const Mat& B);

/// True iff every eigenvalue of m has real part < -kHurwitzTol.
bool is_hurwitz(const Mat& m);

/// e^M by scaling-and-squaring with diagonal Pade approximants.
Mat matrix_exponential(const Mat& m);

/// Solves Acl*S + S*Acl' + Q = 0 by Kronecker vectorization and dense LU.
/// Requires Acl Hurwitz (throws std::invalid_argument otherwise). Intended for
/// small state dimensions (n <= ~30).
SymMat solve_lyapunov(const Mat& acl, const SymMat& q);

/// G(T) = int_0^T e^{-A tau} B B' e^{-A' tau} dtau via Van Loan's augmented
/// matrix exponential. G is invertible iff (A, B) is controllable.
SymMat controllability_gramian(const Mat& A, const Mat& B, double T);

/// Least-squares solution set of B X' + X B' = -rhs.
struct LinearXSolution {
  bool feasible = false;       // residual <= 1e-9 * (1 + ||rhs||_F)
  Mat particular;              // minimum-norm solution (least squares if infeasible)
  std::vector<Mat> null_basis; // orthonormal basis of {X : B X' + X B' = 0}
  double residual = 0.0;       // ||B X' + X B' + rhs||_F at the particular solution
};

LinearXSolution solve_linear_for_x(const Mat& B, const SymMat& rhs);

Mat kron(const Mat& a, const Mat& b);

}  // namespace covsteer
