#pragma once

#include "covsteer/taylor.hpp"
#include "covsteer/types.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace covsteer {

class NotControllableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// f_B : X -> B X' + X B'.
SymMat fB_apply(const Mat& X, const Mat& B);

/// Orthogonal projector onto range(B)^perp (pseudoinverse-based, so rank
/// deficient B is fine). Idempotent to 1e-12.
Mat range_perp_projector(const Mat& B);

/// g_B : Y -> P Y P with P the projector onto range(B)^perp.
SymMat gB_apply(const SymMat& Y, const Mat& B);

/// rank [[A S + S A' + B1 B1', B], [B', 0]] == rank [[0, B], [B', 0]].
bool rank_condition(const Mat& A, const Mat& B, const Mat& B1, const SymMat& Sigma);

enum class Admissibility { kAdmissible, kAdmissibleUnverifiedStability, kInadmissible };

struct AdmissibilityReport {
  bool rank_ok = false;
  bool hurwitz_ok = false;
  bool range_inclusion_ok = false;  // range(B) inside range(B1)
  std::optional<Mat> X;
  std::optional<Mat> K;  // K = -X' Sigma^{-1}
  Admissibility verdict = Admissibility::kInadmissible;
};

/// Decides whether Sigma > 0 can be held as a stationary state covariance by
/// constant feedback: runs the rank test, solves for X, and checks stability
/// of A - B K for the minimum-norm and the power-optimal members of the
/// solution set. Range inclusion range(B) in range(B1) guarantees the Hurwitz
/// check succeeds.
AdmissibilityReport stationary_admissible(const Mat& A, const Mat& B, const Mat& B1,
                                          const SymMat& Sigma);

/// Heymann single-input reduction: K0 places every eigenvalue of A - B K0 at
/// the origin, v makes (A - B K0, B v) a controllable pair, and S is the
/// similarity with S^{-1} (A - B K0) S the upper shift matrix and
/// S^{-1} B v the last basis vector.
struct HeymannReduction {
  Mat K0;
  Vec v;
  Mat S;
};

HeymannReduction heymann_reduction(const Mat& A, const Mat& B);

/// Scalar positive path sigma(t) = exp(h(t)) with h the cubic Hermite
/// interpolant of a0 = log sigma0, aT = log sigmaT, b0 = (2 u0 + q)/sigma0,
/// bT = (2 uT + q)/sigmaT, and u1(t) = (sigma'(t) - q)/2. Boundary values of
/// sigma and u1 are met in closed form.
class ScalarPath {
 public:
  ScalarPath(Poly h, double q);
  double sigma(double t) const;
  double sigma_dot(double t) const;
  double u1(double t) const;
  const Poly& log_sigma() const { return h_; }

 private:
  Poly h_;
  Poly hdot_;
  double q_;
};

ScalarPath scalar_log_interpolation(double sigma0, double sigmaT, double T, double u0, double uT,
                                    double q);

/// Smooth feasible covariance path from Sigma0 to SigmaT: closed-form
/// evaluable anywhere on [0, T] and sampled on the uniform grid.
class ConstructedPath {
 public:
  SymMat sigma_at(double t) const;
  Mat u_at(double t) const;
  const CovariancePath& path() const { return sampled_; }

 private:
  friend ConstructedPath construct_covariance_path(const SteeringProblem&, const SymMat&,
                                                   const Mat&, const Mat&, int);
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  CovariancePath sampled_;
};

/// Constructive proof of finite-horizon steerability: Heymann-reduce (A, B)
/// to single-input shift form, recursively build the block path with the
/// paper's scalar exponential base case, inflate each free diagonal entry
/// until the path is positive definite on a 10N-point scan, then map back
/// through the similarity and feedback transformations. The result satisfies
/// Sigma' = A Sigma + Sigma A' + B U' + U B' + Q with Sigma(0) = Sigma0,
/// Sigma(T) = SigmaT, U(0) = U0, U(T) = UT and Sigma(t) > 0 on the grid.
ConstructedPath construct_covariance_path(const SteeringProblem& problem, const SymMat& Q,
                                          const Mat& U0, const Mat& UT, int N);

/// Time-varying filter d xi = (A - B K(t)) xi dt + B dw, dy = -K(t) xi dt + dw
/// with K(t) = -U(t)' Sigma(t)^{-1}; its state covariance retraces the path
/// when driven by a standard Wiener input.
struct TimeVaryingRealization {
  Mat A;
  Mat B;
  FeedbackPolicy gain;
};

TimeVaryingRealization external_input_realization_finite(const CovariancePath& path, const Mat& A,
                                                         const Mat& B);

}  // namespace covsteer
