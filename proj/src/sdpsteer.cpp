#include "covsteer/sdpsteer.hpp"

#include "covsteer/schrodinger.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <stdexcept>
#include <string>

namespace covsteer {

namespace {

constexpr double kRt1_2 = 0.70710678118654752440;  // 1/sqrt(2)

int svec_dim(int d) { return d * (d + 1) / 2; }

int svec_index(int i, int j) {  // i <= j
  return j * (j + 1) / 2 + i;
}

Mat svec_to_mat(const Vec& z, int offset, int d) {
  Mat s(d, d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i <= j; ++i) {
      const double v = z(offset + svec_index(i, j));
      const double e = (i == j) ? v : v * kRt1_2;
      s(i, j) = e;
      s(j, i) = e;
    }
  }
  return s;
}

void mat_to_svec(const Mat& s, Vec& z, int offset) {
  const int d = static_cast<int>(s.rows());
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i <= j; ++i) {
      z(offset + svec_index(i, j)) = (i == j) ? s(i, j) : s(i, j) / kRt1_2;
    }
  }
}

// Accumulates equality-constraint coefficients over svec coordinates.
struct ProgramBuilder {
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> rhs;
  const std::vector<int>& offsets;
  int block_dim;

  ProgramBuilder(const std::vector<int>& offs, int d) : offsets(offs), block_dim(d) {}

  int add_row(double value) {
    rhs.push_back(value);
    return static_cast<int>(rhs.size()) - 1;
  }

  // Coefficient `coeff` on the (i, j) matrix entry of block `blk`.
  void add(int row, int blk, int i, int j, double coeff) {
    const int a = std::min(i, j), b = std::max(i, j);
    const double scale = (i == j) ? 1.0 : kRt1_2;
    triplets.emplace_back(row, offsets[static_cast<std::size_t>(blk)] + svec_index(a, b),
                          coeff * scale);
  }
};

Mat project_psd(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  if (es.eigenvalues().minCoeff() >= 0.0) return s;
  Vec ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

DiscretizedProblem discretize(const SteeringProblem& problem, int N) {
  problem.validate();
  if (N < 2) throw std::invalid_argument("discretize: N must be >= 2");
  DiscretizedProblem dp;
  dp.problem = problem;
  dp.N = N;
  dp.grid = uniform_grid(problem.T, N);
  dp.dt = problem.T / N;
  dp.eps_psd = 1e-6 * problem.Sigma0.mat().trace() / static_cast<double>(problem.n());
  return dp;
}

ConicProgram assemble_sdp(const DiscretizedProblem& dp) {
  const int n = static_cast<int>(dp.problem.n());
  const int m = static_cast<int>(dp.problem.m());
  const int d = m + n;
  const int nodes = dp.N + 1;

  ConicProgram cp;
  cp.block_dims.assign(static_cast<std::size_t>(nodes), d);
  cp.block_offsets.resize(static_cast<std::size_t>(nodes));
  for (int k = 0; k < nodes; ++k) cp.block_offsets[static_cast<std::size_t>(k)] = k * svec_dim(d);
  cp.dim = nodes * svec_dim(d);

  const Mat& A = dp.problem.A;
  const Mat& B = dp.problem.B;
  const Mat W = dp.problem.B1 * dp.problem.B1.transpose();
  const Mat constant = W + dp.eps_psd * (A + A.transpose());
  const double inv_dt = 1.0 / dp.dt;

  ProgramBuilder pb(cp.block_offsets, d);

  // Block coordinates: Y at (i, j), i, j < m; U(i, c) at (m + i, c); the
  // Sigma part Z = Sigma - eps_psd I at (m + i, m + j).
  auto add_sigma = [&](int row, int blk, int i, int j, double coeff) {
    pb.add(row, blk, m + i, m + j, coeff);
  };
  auto add_u = [&](int row, int blk, int i, int c, double coeff) {
    pb.add(row, blk, m + i, c, coeff);
  };

  // Trapezoidal dynamics, upper-triangle scalar equations per interval.
  for (int k = 0; k < dp.N; ++k) {
    for (int q = 0; q < n; ++q) {
      for (int p = 0; p <= q; ++p) {
        const int row = pb.add_row(constant(p, q));
        add_sigma(row, k + 1, p, q, inv_dt);
        add_sigma(row, k, p, q, -inv_dt);
        for (int blk : {k, k + 1}) {
          for (int a = 0; a < n; ++a) {
            add_sigma(row, blk, a, q, -0.5 * A(p, a));  // (A Z)_{pq}
            add_sigma(row, blk, p, a, -0.5 * A(q, a));  // (Z A')_{pq}
          }
          for (int c = 0; c < m; ++c) {
            add_u(row, blk, q, c, -0.5 * B(p, c));  // (B U')_{pq}
            add_u(row, blk, p, c, -0.5 * B(q, c));  // (U B')_{pq}
          }
        }
      }
    }
  }

  // Boundary pins Z_0 = Sigma0 - eps I, Z_N = SigmaT - eps I.
  for (int q = 0; q < n; ++q) {
    for (int p = 0; p <= q; ++p) {
      const double margin = (p == q) ? dp.eps_psd : 0.0;
      int row = pb.add_row(dp.problem.Sigma0(p, q) - margin);
      add_sigma(row, 0, p, q, 1.0);
      row = pb.add_row(dp.problem.SigmaT(p, q) - margin);
      add_sigma(row, dp.N, p, q, 1.0);
    }
  }

  const int rows = static_cast<int>(pb.rhs.size());
  cp.E.resize(rows, cp.dim);
  cp.E.setFromTriplets(pb.triplets.begin(), pb.triplets.end());
  cp.f = Eigen::Map<const Vec>(pb.rhs.data(), rows);

  cp.c = Vec::Zero(cp.dim);
  for (int k = 0; k < nodes; ++k) {
    const double w = (k == 0 || k == dp.N) ? 0.5 * dp.dt : dp.dt;
    for (int i = 0; i < m; ++i) {
      cp.c(cp.block_offsets[static_cast<std::size_t>(k)] + svec_index(i, i)) = w;
    }
  }
  return cp;
}

namespace {

SdpSolution run_admm(const ConicProgram& cp, const SolverOptions& opts, Vec z) {
  const int dim = cp.dim;
  const Eigen::Index rows = cp.E.rows();

  Eigen::SparseMatrix<double> EEt = (cp.E * Eigen::SparseMatrix<double>(cp.E.transpose()))
                                        .pruned();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(EEt);
  if (chol.info() != Eigen::Success) {
    throw std::runtime_error("solve_sdp: failed to factor the KKT system");
  }
  auto project_affine = [&](const Vec& w) -> Vec {
    return w - cp.E.transpose() * chol.solve(cp.E * w - cp.f);
  };
  auto project_cone = [&](Vec w) -> Vec {
    for (std::size_t b = 0; b < cp.block_dims.size(); ++b) {
      const int d = cp.block_dims[b];
      const int off = cp.block_offsets[b];
      const Mat s = project_psd(svec_to_mat(w, off, d));
      mat_to_svec(s, w, off);
    }
    return w;
  };

  double rho = opts.rho;
  const double alpha = opts.over_relaxation;
  Vec u = Vec::Zero(dim);
  Vec x = z;

  SdpSolution sol;
  double r_norm = 0.0, s_norm = 0.0;
  double first_r = -1.0;
  for (int it = 1; it <= opts.max_iters; ++it) {
    x = project_affine(z - u - cp.c / rho);
    const Vec x_relaxed = alpha * x + (1.0 - alpha) * z;
    const Vec z_prev = z;
    z = project_cone(x_relaxed + u);
    u += x_relaxed - z;

    r_norm = (x - z).norm();
    s_norm = rho * (z - z_prev).norm();
    if (first_r < 0.0) first_r = r_norm;
    const double eps_pri = std::sqrt(static_cast<double>(dim)) * opts.eps_abs +
                           opts.eps_rel * std::max(x.norm(), z.norm());
    const double eps_dual = std::sqrt(static_cast<double>(dim)) * opts.eps_abs +
                            opts.eps_rel * rho * u.norm();
    sol.iterations = it;
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      sol.status = SolverStatus::kOptimal;
      break;
    }
    if (opts.adaptive_rho && it % 25 == 0) {
      if (r_norm > 10.0 * s_norm && rho < 1e6) {
        rho *= 2.0;
        u *= 0.5;
      } else if (s_norm > 10.0 * r_norm && rho > 1e-6) {
        rho *= 0.5;
        u *= 2.0;
      }
    }
  }
  if (sol.status != SolverStatus::kOptimal) {
    // Primal residual stuck well above tolerance and not shrinking points at
    // an inconsistent constraint set.
    const double eps_pri = std::sqrt(static_cast<double>(dim)) * opts.eps_abs;
    sol.status = (r_norm > 1e3 * eps_pri && r_norm > 0.25 * first_r)
                     ? SolverStatus::kInfeasibleSuspected
                     : SolverStatus::kMaxIters;
  }
  sol.primal_residual = r_norm;
  sol.dual_residual = s_norm;
  sol.objective = cp.c.dot(z);
  sol.blocks.reserve(cp.block_dims.size());
  for (std::size_t b = 0; b < cp.block_dims.size(); ++b) {
    sol.blocks.push_back(svec_to_mat(z, cp.block_offsets[b], cp.block_dims[b]));
  }
  (void)rows;
  return sol;
}

}  // namespace

SdpSolution solve_sdp(const ConicProgram& cp, const SolverOptions& opts) {
  return run_admm(cp, opts, Vec::Zero(cp.dim));
}

SdpSolution solve_sdp_warm(const ConicProgram& cp, const SolverOptions& opts,
                           const std::vector<Mat>& z_init) {
  if (z_init.size() != cp.block_dims.size()) {
    throw std::invalid_argument("solve_sdp_warm: block count mismatch");
  }
  Vec z = Vec::Zero(cp.dim);
  for (std::size_t b = 0; b < z_init.size(); ++b) {
    mat_to_svec(symmetrized(z_init[b]), z, cp.block_offsets[b]);
  }
  return run_admm(cp, opts, z);
}

NodeVariables node_variables(const SdpSolution& sol, const DiscretizedProblem& dp, int k) {
  if (k < 0 || k > dp.N) throw std::out_of_range("node_variables: node index");
  const int n = static_cast<int>(dp.problem.n());
  const int m = static_cast<int>(dp.problem.m());
  const Mat& blk = sol.blocks[static_cast<std::size_t>(k)];
  NodeVariables nv;
  nv.Y = SymMat(symmetrized(blk.topLeftCorner(m, m)));
  nv.U = blk.bottomLeftCorner(n, m);
  nv.Sigma = SymMat(symmetrized(blk.bottomRightCorner(n, n)) + dp.eps_psd * Mat::Identity(n, n));
  return nv;
}

FeedbackPolicy recover_gains(const SdpSolution& sol, const DiscretizedProblem& dp) {
  const int n = static_cast<int>(dp.problem.n());
  std::vector<Mat> gains;
  gains.reserve(static_cast<std::size_t>(dp.N) + 1);
  for (int k = 0; k <= dp.N; ++k) {
    const NodeVariables nv = node_variables(sol, dp, k);
    Eigen::SelfAdjointEigenSolver<Mat> es(nv.Sigma.mat(), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 1e-12 * (1.0 + nv.Sigma.mat().norm())) {
      throw std::runtime_error("recover_gains: singular Sigma at node " + std::to_string(k));
    }
    gains.push_back(-(nv.Sigma.mat().ldlt().solve(nv.U)).transpose());
  }
  (void)n;
  return FeedbackPolicy::Sampled(dp.grid, std::move(gains));
}

SteeringReport verify_steering(const FeedbackPolicy& policy, const SteeringProblem& problem) {
  problem.validate();
  const int fine_n = 4 * std::max<int>(100, policy.is_constant()
                                                ? 100
                                                : static_cast<int>(policy.grid().size()) - 1);
  SteeringReport report;
  report.grid = uniform_grid(problem.T, fine_n);
  report.Sigma =
      propagate_covariance(problem.Sigma0, problem.A, problem.B, problem.B1, policy, report.grid);
  report.terminal_error = (report.Sigma.back().mat() - problem.SigmaT.mat()).norm();
  double cost = 0.0;
  double prev = 0.0;
  for (std::size_t k = 0; k < report.grid.size(); ++k) {
    const Mat K = policy.at(report.grid[k]);
    const double integrand = (K * report.Sigma[k].mat() * K.transpose()).trace();
    if (k > 0) cost += 0.5 * (prev + integrand) * (report.grid[k] - report.grid[k - 1]);
    prev = integrand;
  }
  report.realized_cost = cost;
  return report;
}

}  // namespace covsteer
