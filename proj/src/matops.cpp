#include "covsteer/matops.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <string>

namespace covsteer {

Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

SymMat::SymMat(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("SymMat: matrix must be square, got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymTol * scale) {
    throw std::invalid_argument("SymMat: asymmetry " + std::to_string(asym) +
                                " exceeds tolerance");
  }
  m_ = symmetrized(m);
}

double SymMat::min_eigenvalue() const {
  if (m_.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Eigen::Index matrix_rank(const Mat& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  const double thresh = static_cast<double>(std::max(m.rows(), m.cols())) * sv(0) * kRankRelTol;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) ++r;
  }
  return r;
}

Mat controllability_matrix(const Mat& A, const Mat& B) {
  if (A.rows() != A.cols() || A.rows() != B.rows()) {
    throw std::invalid_argument("controllability_matrix: dimension mismatch");
  }
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Mat ctrb(n, n * m);
  Mat block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * m, m) = block;
    block = A * block;
  }
  return ctrb;
}

bool is_controllable(const Mat& A, const Mat& B) {
  return matrix_rank(controllability_matrix(A, B)) == A.rows();
}

bool is_hurwitz(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("is_hurwitz: matrix must be square");
  }
  if (m.rows() == 0) return true;
  Eigen::EigenSolver<Mat> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff() < -kHurwitzTol;
}

namespace {

// Diagonal Pade approximant of order (3, 5, 7, 9 or 13) evaluated at a.
// Returns numerator/denominator polynomials combined as in Higham 2005.
Mat pade_solve(const Mat& u, const Mat& v) {
  // expm = (v - u)^{-1} (v + u)
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

Mat matrix_exponential(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("matrix_exponential: matrix must be square");
  }
  const Eigen::Index n = m.rows();
  if (n == 0) return m;
  const Mat id = Mat::Identity(n, n);
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();  // induced 1-norm

  if (norm <= 1.495585217958292e-2) {
    const Mat m2 = m * m;
    const Mat u = m * (m2 + 60.0 * id);
    const Mat v = 12.0 * m2 + 120.0 * id;
    return pade_solve(u, v);
  }
  if (norm <= 2.539398330063230e-1) {
    const Mat m2 = m * m, m4 = m2 * m2;
    const Mat u = m * (m4 + 420.0 * m2 + 15120.0 * id);
    const Mat v = 30.0 * m4 + 3360.0 * m2 + 30240.0 * id;
    return pade_solve(u, v);
  }
  if (norm <= 9.504178996162932e-1) {
    const Mat m2 = m * m, m4 = m2 * m2, m6 = m4 * m2;
    const Mat u = m * (m6 + 1512.0 * m4 + 277200.0 * m2 + 8648640.0 * id);
    const Mat v = 56.0 * m6 + 25200.0 * m4 + 1995840.0 * m2 + 17297280.0 * id;
    return pade_solve(u, v);
  }
  if (norm <= 2.097847961257068) {
    const Mat m2 = m * m, m4 = m2 * m2, m6 = m4 * m2, m8 = m6 * m2;
    const Mat u = m * (m8 + 3960.0 * m6 + 2162160.0 * m4 + 302702400.0 * m2 + 8821612800.0 * id);
    const Mat v = 90.0 * m8 + 110880.0 * m6 + 30270240.0 * m4 + 2075673600.0 * m2 +
                  17643225600.0 * id;
    return pade_solve(u, v);
  }

  // Pade 13 with scaling and squaring.
  const double theta13 = 5.371920351148152;
  int squarings = 0;
  if (norm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
  }
  const Mat a = m / std::pow(2.0, squarings);
  const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                      1187353796428800.0,  129060195264000.0,   10559470521600.0,
                      670442572800.0,      33522128640.0,       1323241920.0,
                      40840800.0,          960960.0,            16380.0,
                      182.0,               1.0};
  const Mat a2 = a * a, a4 = a2 * a2, a6 = a4 * a2;
  const Mat u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                     b[3] * a2 + b[1] * id);
  const Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                b[2] * a2 + b[0] * id;
  Mat e = pade_solve(u, v);
  for (int i = 0; i < squarings; ++i) e = e * e;
  return e;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

SymMat solve_lyapunov(const Mat& acl, const SymMat& q) {
  if (acl.rows() != acl.cols() || acl.rows() != q.rows()) {
    throw std::invalid_argument("solve_lyapunov: dimension mismatch");
  }
  if (!is_hurwitz(acl)) {
    throw std::invalid_argument(
        "solve_lyapunov: closed-loop matrix is not Hurwitz; the stationary "
        "solution is singular or sign-indefinite");
  }
  const Eigen::Index n = acl.rows();
  const Mat id = Mat::Identity(n, n);
  const Mat lhs = kron(id, acl) + kron(acl, id);
  Vec rhs(n * n);
  for (Eigen::Index j = 0; j < n; ++j) rhs.segment(j * n, n) = -q.mat().col(j);
  const Vec x = lhs.partialPivLu().solve(rhs);
  Mat sigma(n, n);
  for (Eigen::Index j = 0; j < n; ++j) sigma.col(j) = x.segment(j * n, n);
  return SymMat(symmetrized(sigma));
}

SymMat controllability_gramian(const Mat& A, const Mat& B, double T) {
  if (A.rows() != A.cols() || A.rows() != B.rows()) {
    throw std::invalid_argument("controllability_gramian: dimension mismatch");
  }
  if (!(T > 0.0)) {
    throw std::invalid_argument("controllability_gramian: horizon must be positive");
  }
  const Eigen::Index n = A.rows();
  Mat aug = Mat::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = A;
  aug.topRightCorner(n, n) = B * B.transpose();
  aug.bottomRightCorner(n, n) = -A.transpose();
  const Mat e = matrix_exponential(aug * T);
  const Mat g = e.bottomRightCorner(n, n).transpose() * e.topRightCorner(n, n);
  return SymMat(symmetrized(g));
}

LinearXSolution solve_linear_for_x(const Mat& B, const SymMat& rhs) {
  if (B.rows() != rhs.rows()) {
    throw std::invalid_argument("solve_linear_for_x: dimension mismatch");
  }
  const Eigen::Index n = B.rows();
  const Eigen::Index m = B.cols();

  // Column-major vectorization of the map X -> B X' + X B'.
  Mat L = Mat::Zero(n * n, n * m);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index q = 0; q < n; ++q) {
      const Eigen::Index row = p + q * n;
      for (Eigen::Index b = 0; b < m; ++b) {
        L(row, q + b * n) += B(p, b);  // (B X')_{pq}
        L(row, p + b * n) += B(q, b);  // (X B')_{pq}
      }
    }
  }
  Vec target(n * n);
  for (Eigen::Index j = 0; j < n; ++j) target.segment(j * n, n) = -rhs.mat().col(j);

  Eigen::JacobiSVD<Mat> svd(L, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double thresh = static_cast<double>(std::max(L.rows(), L.cols())) * smax * kRankRelTol;

  const Vec uty = svd.matrixU().transpose() * target;
  Vec coeffs = Vec::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) coeffs(i) = uty(i) / sv(i);
  }
  const Vec xvec = svd.matrixV().leftCols(sv.size()) * coeffs;

  LinearXSolution out;
  out.particular = Mat(n, m);
  for (Eigen::Index b = 0; b < m; ++b) out.particular.col(b) = xvec.segment(b * n, n);
  out.residual = (L * xvec - target).norm();
  out.feasible = out.residual <= 1e-9 * (1.0 + rhs.mat().norm());
  for (Eigen::Index i = 0; i < svd.matrixV().cols(); ++i) {
    if (i >= sv.size() || sv(i) <= thresh) {
      Mat basis(n, m);
      const Vec col = svd.matrixV().col(i);
      for (Eigen::Index b = 0; b < m; ++b) basis.col(b) = col.segment(b * n, n);
      out.null_basis.push_back(basis);
    }
  }
  return out;
}

}  // namespace covsteer
