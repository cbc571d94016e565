#include "covsteer/stationary.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace covsteer {

namespace {

// Minimizes trace((Xp + sum_i c_i N_i)' W (Xp + sum_i c_i N_i)) with W > 0
// over the coefficients c by normal equations. Returns the minimizer X.
Mat minimize_weighted_norm(const Mat& Xp, const std::vector<Mat>& basis, const Mat& W) {
  if (basis.empty()) return Xp;
  const Eigen::Index d = static_cast<Eigen::Index>(basis.size());
  Mat G(d, d);
  Vec g(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Mat wni = W * basis[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) {
      G(i, j) = (basis[static_cast<std::size_t>(j)].transpose() * wni).trace();
    }
    g(i) = (Xp.transpose() * wni).trace();
  }
  const Vec c = G.ldlt().solve(-g);
  Mat x = Xp;
  for (Eigen::Index i = 0; i < d; ++i) x += c(i) * basis[static_cast<std::size_t>(i)];
  return x;
}

}  // namespace

StationarySolution optimal_stationary_gain(const StationaryProblem& problem) {
  problem.validate();
  const Mat& A = problem.A;
  const Mat& B = problem.B;
  const SymMat rhs(symmetrized(A * problem.Sigma.mat() + problem.Sigma.mat() * A.transpose() +
                               problem.B1 * problem.B1.transpose()));
  const LinearXSolution ls = solve_linear_for_x(B, rhs);
  if (!ls.feasible) {
    throw InfeasibleError(
        "optimal_stationary_gain: the stationary Lyapunov-like equation has no "
        "solution X (residual " +
        std::to_string(ls.residual) + "); Sigma is not an admissible stationary covariance");
  }
  const Mat sigma_inv = problem.Sigma.mat().inverse();
  StationarySolution sol;
  sol.X = minimize_weighted_norm(ls.particular, ls.null_basis, sigma_inv);
  sol.K = -sol.X.transpose() * sigma_inv;
  sol.power = (sol.K * problem.Sigma.mat() * sol.K.transpose()).trace();
  sol.hurwitz_ok = is_hurwitz(A - B * sol.K);
  return sol;
}

DualEval dual_functional(const SymMat& Pi, const StationaryProblem& problem) {
  const Mat& A = problem.A;
  const Mat BBt = problem.B * problem.B.transpose();
  const Mat B1B1t = problem.B1 * problem.B1.transpose();
  const Mat& pi = Pi.mat();
  const Mat& sigma = problem.Sigma.mat();
  DualEval out;
  out.value = ((A.transpose() * pi + pi * A - pi * BBt * pi) * sigma).trace() +
              (pi * B1B1t).trace();
  const Mat acl = A - BBt * pi;
  out.gradient = SymMat(symmetrized(acl * sigma + sigma * acl.transpose() + B1B1t));
  return out;
}

PiFamily pi_family_from_gain(const Mat& K, const Mat& B) {
  if (K.cols() != B.rows() || K.rows() != B.cols()) {
    throw std::invalid_argument("pi_family_from_gain: K must be m x n for B n x m");
  }
  const Eigen::Index n = B.rows();
  const Eigen::Index m = B.cols();
  const Eigen::Index sn = n * (n + 1) / 2;

  // Coordinates over the symmetric subspace: s(i, j) for i <= j, with
  // off-diagonal coordinates scaled by sqrt(2) so the basis is orthonormal.
  const double rt2 = std::sqrt(2.0);
  auto sym_from_coords = [&](const Vec& s) {
    Mat pi(n, n);
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i, ++idx) {
        const double v = (i == j) ? s(idx) : s(idx) / rt2;
        pi(i, j) = v;
        pi(j, i) = v;
      }
    }
    return pi;
  };

  Mat L = Mat::Zero(m * n, sn);
  {
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i, ++idx) {
        // (B' Pi)_{rq} picks up Pi_{iq} with coefficient B(i, r).
        for (Eigen::Index r = 0; r < m; ++r) {
          const double scale = (i == j) ? 1.0 : 1.0 / rt2;
          L(r + j * m, idx) += B(i, r) * scale;
          if (i != j) L(r + i * m, idx) += B(j, r) * scale;
        }
      }
    }
  }
  Vec target(m * n);
  for (Eigen::Index j = 0; j < n; ++j) target.segment(j * m, m) = K.col(j);

  Eigen::JacobiSVD<Mat> svd(L, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double thresh = static_cast<double>(std::max(L.rows(), L.cols())) * smax * kRankRelTol;
  const Vec uty = svd.matrixU().transpose() * target;
  Vec coeffs = Vec::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) coeffs(i) = uty(i) / sv(i);
  }
  const Vec s = svd.matrixV().leftCols(sv.size()) * coeffs;
  const double residual = (L * s - target).norm();
  if (residual > 1e-9 * (1.0 + K.norm())) {
    throw InfeasibleError("pi_family_from_gain: K is not realizable as B' Pi (residual " +
                          std::to_string(residual) + ")");
  }
  PiFamily fam;
  fam.particular = SymMat(sym_from_coords(s));
  for (Eigen::Index i = 0; i < svd.matrixV().cols(); ++i) {
    if (i >= sv.size() || sv(i) <= thresh) {
      fam.null_basis.emplace_back(sym_from_coords(svd.matrixV().col(i)));
    }
  }
  return fam;
}

SymMat willems_q(const SymMat& Pi, const Mat& A, const Mat& B) {
  const Mat& pi = Pi.mat();
  return SymMat(symmetrized(-A.transpose() * pi - pi * A + pi * B * B.transpose() * pi));
}

RegularizedGain epsilon_regularized_gain(const StationaryProblem& problem, const Mat& K,
                                         double epsilon) {
  problem.validate();
  if (epsilon < 0.0) throw std::invalid_argument("epsilon_regularized_gain: epsilon < 0");
  const Mat& A = problem.A;
  const Mat& B = problem.B;
  const Mat& sigma = problem.Sigma.mat();
  const Mat B1B1t = problem.B1 * problem.B1.transpose();
  const Mat acl = A - B * K;
  const double res = (acl * sigma + sigma * acl.transpose() + B1B1t).norm();
  if (res > 1e-8 * (1.0 + B1B1t.norm() + sigma.norm())) {
    throw std::invalid_argument(
        "epsilon_regularized_gain: K does not hold Sigma stationary (residual " +
        std::to_string(res) + ")");
  }
  RegularizedGain out;
  if (epsilon == 0.0) {
    out.K_eps = K;
    out.Sigma_eps = problem.Sigma;
    out.gap = 0.0;
    return out;
  }
  out.K_eps = K + 0.5 * epsilon * B.transpose() * sigma.inverse();
  const Mat acl_eps = A - B * out.K_eps;
  if (!is_hurwitz(acl_eps)) {
    // The Lyapunov inequality (A - B K_eps) Sigma + Sigma (...)' <= -eps B B'
    // makes this impossible unless B = 0; keep it as a hard failure.
    throw std::runtime_error("epsilon_regularized_gain: regularized loop not Hurwitz");
  }
  out.Sigma_eps = solve_lyapunov(acl_eps, SymMat(B1B1t));
  out.gap = (sigma - out.Sigma_eps.mat()).norm();
  return out;
}

StationaryRealization stationary_external_realization(const Mat& A, const Mat& B,
                                                      const SymMat& Sigma) {
  if (!is_hurwitz(A)) {
    throw std::invalid_argument("stationary_external_realization: A must be Hurwitz");
  }
  const Mat& sigma = Sigma.mat();
  const SymMat rhs(symmetrized(A * sigma + sigma * A.transpose()));
  const LinearXSolution ls = solve_linear_for_x(B, rhs);
  if (!ls.feasible) {
    throw InfeasibleError(
        "stationary_external_realization: A Sigma + Sigma A' is outside the range of "
        "X -> B X' + X B' (residual " +
        std::to_string(ls.residual) + ")");
  }
  StationaryRealization out;
  out.X = ls.particular;
  const Mat sigma_inv = sigma.inverse();
  out.K_f = 0.5 * B.transpose() * sigma_inv - out.X.transpose() * sigma_inv;
  out.state_matrix = A - B * out.K_f;
  out.input_matrix = B;
  out.output_gain = -out.K_f;
  const double check =
      (out.state_matrix * sigma + sigma * out.state_matrix.transpose() + B * B.transpose())
          .norm();
  if (check > 1e-9 * (1.0 + sigma.norm() + (B * B.transpose()).norm())) {
    throw std::runtime_error(
        "stationary_external_realization: closed-loop Lyapunov identity failed (residual " +
        std::to_string(check) + ")");
  }
  return out;
}

}  // namespace covsteer
