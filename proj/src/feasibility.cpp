#include "covsteer/feasibility.hpp"

#include "covsteer/stationary.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace covsteer {

SymMat fB_apply(const Mat& X, const Mat& B) {
  if (X.rows() != B.rows() || X.cols() != B.cols()) {
    throw std::invalid_argument("fB_apply: X must have the shape of B");
  }
  return SymMat(B * X.transpose() + X * B.transpose());
}

Mat range_perp_projector(const Mat& B) {
  const Eigen::Index n = B.rows();
  if (B.cols() == 0 || B.cwiseAbs().maxCoeff() == 0.0) return Mat::Identity(n, n);
  Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double thresh = static_cast<double>(std::max(B.rows(), B.cols())) * sv(0) * kRankRelTol;
  Mat P = Mat::Identity(n, n);
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) {
      const Vec u = svd.matrixU().col(i);
      P -= u * u.transpose();
    }
  }
  return P;
}

SymMat gB_apply(const SymMat& Y, const Mat& B) {
  const Mat P = range_perp_projector(B);
  return SymMat(symmetrized(P * Y.mat() * P));
}

bool rank_condition(const Mat& A, const Mat& B, const Mat& B1, const SymMat& Sigma) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || B1.rows() != n || Sigma.rows() != n) {
    throw std::invalid_argument("rank_condition: dimension mismatch");
  }
  const Mat W = symmetrized(A * Sigma.mat() + Sigma.mat() * A.transpose() +
                            B1 * B1.transpose());
  Mat M1 = Mat::Zero(n + m, n + m);
  M1.topLeftCorner(n, n) = W;
  M1.topRightCorner(n, m) = B;
  M1.bottomLeftCorner(m, n) = B.transpose();
  Mat M2 = M1;
  M2.topLeftCorner(n, n).setZero();
  return matrix_rank(M1) == matrix_rank(M2);
}

AdmissibilityReport stationary_admissible(const Mat& A, const Mat& B, const Mat& B1,
                                          const SymMat& Sigma) {
  if (!(Sigma.min_eigenvalue() > 0.0)) {
    throw std::invalid_argument("stationary_admissible: Sigma must be positive definite");
  }
  AdmissibilityReport report;
  {
    Mat both(B1.rows(), B1.cols() + B.cols());
    both << B1, B;
    report.range_inclusion_ok = matrix_rank(B1) == matrix_rank(both);
  }
  report.rank_ok = rank_condition(A, B, B1, Sigma);
  if (!report.rank_ok) {
    report.verdict = Admissibility::kInadmissible;
    return report;
  }

  const SymMat rhs(symmetrized(A * Sigma.mat() + Sigma.mat() * A.transpose() +
                               B1 * B1.transpose()));
  const LinearXSolution ls = solve_linear_for_x(B, rhs);
  if (!ls.feasible) {
    report.verdict = Admissibility::kInadmissible;
    return report;
  }
  const Mat sigma_inv = Sigma.mat().inverse();

  std::vector<Mat> candidates = {ls.particular};
  if (!ls.null_basis.empty()) {
    StationaryProblem sp{A, B, B1, Sigma};
    candidates.push_back(optimal_stationary_gain(sp).X);
  }
  for (const Mat& x : candidates) {
    const Mat K = -x.transpose() * sigma_inv;
    if (is_hurwitz(A - B * K)) {
      report.hurwitz_ok = true;
      report.X = x;
      report.K = K;
      report.verdict = Admissibility::kAdmissible;
      return report;
    }
  }
  report.X = ls.particular;
  report.K = -ls.particular.transpose() * sigma_inv;
  report.verdict = Admissibility::kAdmissibleUnverifiedStability;
  return report;
}

namespace {

Mat shift_matrix(Eigen::Index k) {
  Mat s = Mat::Zero(k, k);
  for (Eigen::Index i = 0; i + 1 < k; ++i) s(i, i + 1) = 1.0;
  return s;
}

// Residual of x against the span of the first `cnt` columns of the
// orthonormal basis Q.
Vec residual_against(const Mat& Q, Eigen::Index cnt, const Vec& x) {
  Vec r = x;
  for (Eigen::Index i = 0; i < cnt; ++i) r -= Q.col(i).dot(x) * Q.col(i);
  return r;
}

}  // namespace

HeymannReduction heymann_reduction(const Mat& A, const Mat& B) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n) {
    throw std::invalid_argument("heymann_reduction: dimension mismatch");
  }
  if (!is_controllable(A, B)) {
    throw NotControllableError("heymann_reduction: (A, B) is not controllable");
  }

  std::mt19937_64 rng(0x5eed5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_unit = [&](Eigen::Index d) {
    Vec v(d);
    do {
      for (Eigen::Index i = 0; i < d; ++i) v(i) = gauss(rng);
    } while (v.norm() < 1e-8);
    return Vec(v / v.norm());
  };

  std::vector<Vec> v_candidates;
  for (Eigen::Index i = 0; i < m; ++i) v_candidates.push_back(Vec::Unit(m, i));
  for (int i = 0; i < 40; ++i) v_candidates.push_back(random_unit(m));

  // Among admissible direction vectors, keep the best-conditioned similarity:
  // every later transform amplifies roundoff by cond(S)^2.
  HeymannReduction best;
  double best_cond = -1.0;

  const double bnorm = 1.0 + B.cwiseAbs().maxCoeff();
  for (Vec v : v_candidates) {
    const Vec b = B * v;
    if (b.norm() <= 1e-12 * bnorm) continue;

    // Hautus chain: x_{i+1} = A x_i + B u_i kept independent of x_1..x_i.
    Mat X(n, n), U = Mat::Zero(m, n), Qb(n, n);
    X.col(0) = b;
    Qb.col(0) = b / b.norm();
    bool chain_ok = true;
    for (Eigen::Index i = 1; i < n && chain_ok; ++i) {
      std::vector<Vec> u_candidates = {Vec::Zero(m)};
      for (Eigen::Index j = 0; j < m; ++j) {
        u_candidates.push_back(Vec::Unit(m, j));
        u_candidates.push_back(-Vec::Unit(m, j));
      }
      for (int j = 0; j < 8; ++j) u_candidates.push_back(random_unit(m));
      double best = -1.0;
      Vec best_u, best_x;
      for (const Vec& u : u_candidates) {
        const Vec x = A * X.col(i - 1) + B * u;
        const double res = residual_against(Qb, i, x).norm();
        if (res > best) {
          best = res;
          best_u = u;
          best_x = x;
        }
      }
      if (best <= 1e-10 * (1.0 + best_x.norm())) {
        chain_ok = false;
        break;
      }
      X.col(i) = best_x;
      U.col(i - 1) = best_u;
      const Vec q = residual_against(Qb, i, best_x);
      Qb.col(i) = q / q.norm();
    }
    if (!chain_ok) continue;

    // F X = U  =>  (A + B F) x_i = x_{i+1}; our convention is K1 = -F.
    const Mat F = X.transpose().partialPivLu().solve(U.transpose()).transpose();
    const Mat K1 = -F;
    const Mat Ftil = A - B * K1;
    const Mat C = controllability_matrix(Ftil, b);
    if (matrix_rank(C) != n) continue;

    // Ackermann with target polynomial lambda^n: all eigenvalues at 0.
    Mat Fpow = Mat::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i) Fpow = Fpow * Ftil;
    const Vec z = C.transpose().partialPivLu().solve(Vec::Unit(n, n - 1));
    const Mat k_row = z.transpose() * Fpow;
    const Mat K0 = K1 + v * k_row;
    const Mat Fnil = A - B * K0;

    Mat S(n, n);
    S.col(n - 1) = b;
    for (Eigen::Index j = n - 1; j-- > 0;) S.col(j) = Fnil * S.col(j + 1);
    if (matrix_rank(S) != n) continue;

    const Mat Sinv = S.partialPivLu().inverse();
    const double cond = S.norm() * Sinv.norm();
    const double res_shift = (Sinv * Fnil * S - shift_matrix(n)).norm();
    const double res_b = (Sinv * b - Vec::Unit(n, n - 1)).norm();
    if (res_shift > 1e-6 * cond * (1.0 + Fnil.norm()) || res_b > 1e-8 * cond) continue;

    if (best_cond < 0.0 || cond < best_cond) {
      best_cond = cond;
      best.K0 = K0;
      best.v = v;
      best.S = S;
      if (std::abs(b(n - 1)) > 1e-9 * b.norm()) {
        const double alpha = 1.0 / b(n - 1);
        best.v *= alpha;
        best.S *= alpha;
      }
    }
    if (best_cond >= 0.0 && best_cond < 3.0 * static_cast<double>(n)) break;
  }
  if (best_cond >= 0.0) return best;
  throw std::runtime_error("heymann_reduction: no admissible direction vector found");
}

ScalarPath::ScalarPath(Poly h, double q) : h_(std::move(h)), hdot_(h_.derivative()), q_(q) {}

double ScalarPath::sigma(double t) const { return std::exp(h_.eval(t)); }

double ScalarPath::sigma_dot(double t) const { return hdot_.eval(t) * sigma(t); }

double ScalarPath::u1(double t) const { return 0.5 * (sigma_dot(t) - q_); }

ScalarPath scalar_log_interpolation(double sigma0, double sigmaT, double T, double u0, double uT,
                                    double q) {
  if (!(sigma0 > 0.0) || !(sigmaT > 0.0)) {
    throw std::invalid_argument("scalar_log_interpolation: boundary values must be positive");
  }
  if (!(T > 0.0)) throw std::invalid_argument("scalar_log_interpolation: T must be positive");
  const std::vector<double> j0 = {std::log(sigma0), (2.0 * u0 + q) / sigma0};
  const std::vector<double> jT = {std::log(sigmaT), (2.0 * uT + q) / sigmaT};
  return ScalarPath(hermite_two_point(T, j0, jT), q);
}

// ---------------------------------------------------------------------------
// Constructive path of Theorem 1 in canonical shift coordinates.
//
// Levels are indexed by block size k; the problem at level k has dynamics
//   Sigma' = A_k Sigma + Sigma A_k' + e_k u' + u e_k' + Q(t)
// with A_k the upper shift and e_k the last basis vector. The top-left
// (k-1) block reproduces the same structure with the off-diagonal column
// sigma_2 acting as the control of level k-1, which fixes how boundary jets
// propagate down the recursion.
// ---------------------------------------------------------------------------

namespace {

using JetMat = std::vector<Mat>;  // Taylor coefficient matrices, low order first

Mat shift_left_mul(const Mat& M) {  // A_k * M
  Mat out = Mat::Zero(M.rows(), M.cols());
  out.topRows(M.rows() - 1) = M.bottomRows(M.rows() - 1);
  return out;
}

Mat shift_right_mul(const Mat& M) {  // M * A_k'
  Mat out = Mat::Zero(M.rows(), M.cols());
  out.leftCols(M.cols() - 1) = M.rightCols(M.cols() - 1);
  return out;
}

Mat last_basis_outer(const Vec& u) {  // e_k u' + u e_k'
  const Eigen::Index k = u.size();
  Mat out = Mat::Zero(k, k);
  out.row(k - 1) = u.transpose();
  out.col(k - 1) += u;
  return out;
}

struct LevelPlan {
  int k = 1;
  double T = 0.0;
  std::vector<Poly> Q;  // k*k entries, row-major, symmetric
  Poly h;               // base case: log of the scalar state
  std::unique_ptr<LevelPlan> sub;
  Poly sigma3;  // free diagonal entry (k > 1)
};

Mat q_taylor_coeff(const std::vector<Poly>& Q, int k, double t, int order, int coeff) {
  Mat out(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      out(i, j) = Q[static_cast<std::size_t>(i * k + j)].taylor_at(t, order)[
          static_cast<std::size_t>(coeff)];
    }
  }
  return out;
}

// State Taylor coefficients at an endpoint from the endpoint value and the
// control jets, by repeated differentiation of the dynamics.
JetMat derive_state_jets(const Mat& sigma_end, const Mat& ujets, const std::vector<Poly>& Q,
                         int k, double t_end) {
  const int r = static_cast<int>(ujets.cols()) - 1;
  JetMat jets(static_cast<std::size_t>(r) + 2);
  jets[0] = sigma_end;
  for (int j = 0; j <= r; ++j) {
    const Mat f = shift_left_mul(jets[static_cast<std::size_t>(j)]) +
                  shift_right_mul(jets[static_cast<std::size_t>(j)]) +
                  last_basis_outer(ujets.col(j)) + q_taylor_coeff(Q, k, t_end, j, j);
    jets[static_cast<std::size_t>(j) + 1] = f / static_cast<double>(j + 1);
  }
  return jets;
}

struct LevelEval {
  JetMat state;              // length d+1, each k x k
  std::vector<Vec> control;  // length d, each k
};

LevelEval eval_level(const LevelPlan& plan, double t, int d) {
  const int k = plan.k;
  LevelEval out;
  if (k == 1) {
    const std::vector<double> hj = plan.h.taylor_at(t, d);
    const std::vector<double> sj = exp_taylor(hj);
    const std::vector<double> qj = plan.Q[0].taylor_at(t, d);
    out.state.resize(static_cast<std::size_t>(d) + 1);
    for (int j = 0; j <= d; ++j) {
      out.state[static_cast<std::size_t>(j)] = Mat::Constant(1, 1, sj[static_cast<std::size_t>(j)]);
    }
    out.control.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      const double sdot = static_cast<double>(j + 1) * sj[static_cast<std::size_t>(j) + 1];
      out.control[static_cast<std::size_t>(j)] =
          Vec::Constant(1, 0.5 * (sdot - qj[static_cast<std::size_t>(j)]));
    }
    return out;
  }

  const LevelEval sub = eval_level(*plan.sub, t, d + 1);
  const std::vector<double> s3 = plan.sigma3.taylor_at(t, d);
  out.state.resize(static_cast<std::size_t>(d) + 1);
  for (int j = 0; j <= d; ++j) {
    Mat s = Mat::Zero(k, k);
    s.topLeftCorner(k - 1, k - 1) = sub.state[static_cast<std::size_t>(j)];
    s.col(k - 1).head(k - 1) = sub.control[static_cast<std::size_t>(j)];
    s.row(k - 1).head(k - 1) = sub.control[static_cast<std::size_t>(j)].transpose();
    s(k - 1, k - 1) = s3[static_cast<std::size_t>(j)];
    out.state[static_cast<std::size_t>(j)] = s;
  }
  out.control.resize(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    const Mat& s = out.state[static_cast<std::size_t>(j)];
    const Mat g = static_cast<double>(j + 1) * out.state[static_cast<std::size_t>(j) + 1] -
                  shift_left_mul(s) - shift_right_mul(s) - q_taylor_coeff(plan.Q, k, t, j, j);
    Vec u(k);
    u.head(k - 1) = g.row(k - 1).head(k - 1).transpose();
    u(k - 1) = 0.5 * g(k - 1, k - 1);
    out.control[static_cast<std::size_t>(j)] = u;
  }
  return out;
}

std::vector<Poly> submatrix_polys(const std::vector<Poly>& Q, int k) {
  std::vector<Poly> sub;
  sub.reserve(static_cast<std::size_t>((k - 1) * (k - 1)));
  for (int i = 0; i < k - 1; ++i) {
    for (int j = 0; j < k - 1; ++j) sub.push_back(Q[static_cast<std::size_t>(i * k + j)]);
  }
  return sub;
}

Poly bump_poly(double T, int exponent) {
  // (t (T - t))^exponent / T^(2 exponent): vanishes to order exponent-1 at
  // both endpoints, peaks in the interior.
  Poly base({0.0, T, -1.0});  // t(T - t)
  Poly p = Poly::Constant(1.0);
  for (int i = 0; i < exponent; ++i) p = p * base;
  return p * std::pow(T, -2.0 * exponent);
}

std::unique_ptr<LevelPlan> plan_level(int k, double T, const Mat& sigma0, const Mat& sigmaT,
                                      const Mat& u0jets, const Mat& uTjets,
                                      const std::vector<Poly>& Q,
                                      const std::vector<double>& scan_ts) {
  auto plan = std::make_unique<LevelPlan>();
  plan->k = k;
  plan->T = T;
  plan->Q = Q;
  const int r = static_cast<int>(u0jets.cols()) - 1;
  const JetMat jets0 = derive_state_jets(sigma0, u0jets, Q, k, 0.0);
  const JetMat jetsT = derive_state_jets(sigmaT, uTjets, Q, k, T);

  if (k == 1) {
    std::vector<double> s0(jets0.size()), sT(jetsT.size());
    for (std::size_t j = 0; j < jets0.size(); ++j) {
      s0[j] = jets0[j](0, 0);
      sT[j] = jetsT[j](0, 0);
    }
    plan->h = hermite_two_point(T, log_taylor(s0), log_taylor(sT));
    return plan;
  }

  Mat subU0(k - 1, r + 2), subUT(k - 1, r + 2);
  for (int j = 0; j <= r + 1; ++j) {
    subU0.col(j) = jets0[static_cast<std::size_t>(j)].col(k - 1).head(k - 1);
    subUT.col(j) = jetsT[static_cast<std::size_t>(j)].col(k - 1).head(k - 1);
  }
  plan->sub = plan_level(k - 1, T, sigma0.topLeftCorner(k - 1, k - 1),
                         sigmaT.topLeftCorner(k - 1, k - 1), subU0, subUT,
                         submatrix_polys(Q, k), scan_ts);

  std::vector<double> c0(jets0.size()), cT(jetsT.size());
  for (std::size_t j = 0; j < jets0.size(); ++j) {
    c0[j] = jets0[j](k - 1, k - 1);
    cT[j] = jetsT[j](k - 1, k - 1);
  }
  const Poly base = hermite_two_point(T, c0, cT);
  const Poly bump = bump_poly(T, r + 2);

  // Cache sub-level values on the scan grid; they do not depend on sigma3.
  std::vector<Mat> sub_state(scan_ts.size());
  std::vector<Vec> sub_control(scan_ts.size());
  for (std::size_t i = 0; i < scan_ts.size(); ++i) {
    const LevelEval ev = eval_level(*plan->sub, scan_ts[i], 1);
    sub_state[i] = ev.state[0];
    sub_control[i] = ev.control[0];
  }

  // Positivity via the Schur complement: Sigma > 0 iff the sub-block is
  // (already) positive and sigma3 exceeds sigma2' Sigma1^{-1} sigma2. The
  // required excess is targeted directly so the inflation stays minimal;
  // amplitude past what positivity needs compounds up the recursion through
  // the control magnitudes.
  auto schur_needed = [&](std::size_t i) {
    return sub_control[i].dot(sub_state[i].ldlt().solve(sub_control[i]));
  };
  const double slack_at_0 = base.eval(0.0) - schur_needed(0);
  const double slack_at_T = base.eval(T) - schur_needed(scan_ts.size() - 1);
  const double margin = 0.25 * std::max(0.0, std::min(slack_at_0, slack_at_T));

  double c_target = 0.0;
  for (std::size_t i = 1; i + 1 < scan_ts.size(); ++i) {
    const double deficit = schur_needed(i) + margin - base.eval(scan_ts[i]);
    const double b = bump.eval(scan_ts[i]);
    if (deficit > 0.0 && b > 0.0) c_target = std::max(c_target, deficit / b);
  }

  double c = c_target > 0.0 ? 2.0 * c_target : 1.0;
  for (int attempt = 0; attempt <= 60; ++attempt) {
    const Poly candidate = base + bump * c;
    bool positive = true;
    for (std::size_t i = 0; i < scan_ts.size() && positive; ++i) {
      Mat s(k, k);
      s.topLeftCorner(k - 1, k - 1) = sub_state[i];
      s.col(k - 1).head(k - 1) = sub_control[i];
      s.row(k - 1).head(k - 1) = sub_control[i].transpose();
      s(k - 1, k - 1) = candidate.eval(scan_ts[i]);
      Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(s), Eigen::EigenvaluesOnly);
      positive = es.eigenvalues().minCoeff() > 0.0;
    }
    if (positive) {
      plan->sigma3 = candidate;
#ifdef COVSTEER_PLAN_DEBUG
      double bmax = 0, smax = 0, cmax = 0;
      for (std::size_t i = 0; i < scan_ts.size(); ++i) {
        bmax = std::max(bmax, std::abs(base.eval(scan_ts[i])));
        smax = std::max(smax, std::abs(candidate.eval(scan_ts[i])));
        cmax = std::max(cmax, sub_control[i].norm());
      }
      std::fprintf(stderr,
                   "level k=%d r=%d: c=%g max|base|=%g max|sigma3|=%g max|sub_u|=%g\n", k, r, c,
                   bmax, smax, cmax);
#endif
      return plan;
    }
    c *= 2.0;
  }
  throw std::runtime_error(
      "construct_covariance_path: free-entry inflation did not reach positivity after 60 "
      "doublings");
}

}  // namespace

struct ConstructedPath::Impl {
  double T = 0.0;
  Eigen::Index n = 0, m = 0;
  Mat K0;
  Vec v;
  Mat S;
  Mat P0, PT;
  std::unique_ptr<LevelPlan> plan;

  std::pair<Mat, Mat> eval(double t) const {
    const LevelEval ev = eval_level(*plan, t, 1);
    const Mat sigma = symmetrized(S * ev.state[0] * S.transpose());
    const Vec u_can = S * ev.control[0];
    const Mat U = u_can * v.transpose() - sigma * K0.transpose() + ((T - t) / T) * P0 +
                  (t / T) * PT;
    return {sigma, U};
  }
};

SymMat ConstructedPath::sigma_at(double t) const { return SymMat(impl_->eval(t).first); }

Mat ConstructedPath::u_at(double t) const { return impl_->eval(t).second; }

ConstructedPath construct_covariance_path(const SteeringProblem& problem, const SymMat& Q,
                                          const Mat& U0, const Mat& UT, int N) {
  problem.validate();
  const Eigen::Index n = problem.n();
  const Eigen::Index m = problem.m();
  if (Q.rows() != n) throw std::invalid_argument("construct_covariance_path: Q must be n x n");
  if (U0.rows() != n || U0.cols() != m || UT.rows() != n || UT.cols() != m) {
    throw std::invalid_argument("construct_covariance_path: U0, UT must be n x m");
  }
  if (Q.min_eigenvalue() < -1e-10 * (1.0 + Q.mat().norm())) {
    throw std::invalid_argument("construct_covariance_path: Q must be positive semidefinite");
  }
  if (N < 2) throw std::invalid_argument("construct_covariance_path: N must be >= 2");
  if (!is_controllable(problem.A, problem.B)) {
    throw NotControllableError("construct_covariance_path: (A, B) is not controllable");
  }
  const double T = problem.T;

  const HeymannReduction hey = heymann_reduction(problem.A, problem.B);
  const Mat Sinv = hey.S.partialPivLu().inverse();
  const Mat sigma0_hat = symmetrized(Sinv * problem.Sigma0.mat() * Sinv.transpose());
  const Mat sigmaT_hat = symmetrized(Sinv * problem.SigmaT.mat() * Sinv.transpose());
  const Mat q_hat = symmetrized(Sinv * Q.mat() * Sinv.transpose());

  const Mat u_tilde0 = U0 + problem.Sigma0.mat() * hey.K0.transpose();
  const Mat u_tildeT = UT + problem.SigmaT.mat() * hey.K0.transpose();
  const Mat b_hat = Sinv * problem.B;
  auto boundary_data = [&](const Mat& u_tilde) {
    const Mat u_hat = Sinv * u_tilde;
    const Mat g = b_hat * u_hat.transpose() + u_hat * b_hat.transpose();
    Vec u_can(n);
    u_can.head(n - 1) = g.row(n - 1).head(n - 1).transpose();
    u_can(n - 1) = 0.5 * g(n - 1, n - 1);
    const Mat R = g - last_basis_outer(u_can);
    return std::make_pair(u_can, R);
  };
  const auto [u_can0, R0] = boundary_data(u_tilde0);
  const auto [u_canT, RT] = boundary_data(u_tildeT);

  std::vector<Poly> q_polys;
  q_polys.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      q_polys.emplace_back(
          std::vector<double>{q_hat(i, j) + R0(i, j), (RT(i, j) - R0(i, j)) / T});
    }
  }

  const std::vector<double> scan_ts = uniform_grid(T, 10 * N);
  auto impl = std::make_shared<ConstructedPath::Impl>();
  impl->T = T;
  impl->n = n;
  impl->m = m;
  impl->K0 = hey.K0;
  impl->v = hey.v;
  impl->S = hey.S;
  impl->plan = plan_level(static_cast<int>(n), T, sigma0_hat, sigmaT_hat, Mat(u_can0), Mat(u_canT),
                          q_polys, scan_ts);
  impl->P0 = u_tilde0 - (hey.S * u_can0) * hey.v.transpose();
  impl->PT = u_tildeT - (hey.S * u_canT) * hey.v.transpose();

  ConstructedPath out;
  out.impl_ = impl;
  out.sampled_.grid = uniform_grid(T, N);
  out.sampled_.Sigma.reserve(out.sampled_.grid.size());
  out.sampled_.U.reserve(out.sampled_.grid.size());
  for (double t : out.sampled_.grid) {
    const auto [sigma, u] = impl->eval(t);
    out.sampled_.Sigma.emplace_back(sigma);
    out.sampled_.U.push_back(u);
  }
  return out;
}

TimeVaryingRealization external_input_realization_finite(const CovariancePath& path, const Mat& A,
                                                         const Mat& B) {
  if (path.grid.size() < 2 || path.Sigma.size() != path.grid.size() ||
      path.U.size() != path.grid.size()) {
    throw std::invalid_argument("external_input_realization_finite: malformed path");
  }
  std::vector<Mat> gains;
  gains.reserve(path.grid.size());
  for (std::size_t k = 0; k < path.grid.size(); ++k) {
    const Mat& sigma = path.Sigma[k].mat();
    Eigen::SelfAdjointEigenSolver<Mat> es(sigma, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 1e-14 * (1.0 + sigma.norm())) {
      throw std::runtime_error("external_input_realization_finite: singular Sigma at node " +
                               std::to_string(k));
    }
    gains.push_back(-(sigma.ldlt().solve(path.U[k])).transpose());
  }
  TimeVaryingRealization out;
  out.A = A;
  out.B = B;
  out.gain = FeedbackPolicy::Sampled(path.grid, std::move(gains));
  return out;
}

}  // namespace covsteer
