#include "covsteer/schrodinger.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace covsteer {

namespace {

Mat clamp_psd(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  if (es.eigenvalues().minCoeff() >= 0.0) return s;
  Vec ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Linear interpolation of a sampled matrix trajectory on an ascending grid.
Mat interp_traj(const std::vector<double>& grid, const std::vector<SymMat>& traj, double t) {
  if (t <= grid.front()) return traj.front().mat();
  if (t >= grid.back()) return traj.back().mat();
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
  return (1.0 - w) * traj[lo].mat() + w * traj[hi].mat();
}

std::vector<SymMat> to_symmetric(const std::vector<Mat>& traj) {
  std::vector<SymMat> out;
  out.reserve(traj.size());
  for (const Mat& m : traj) out.emplace_back(symmetrized(m));
  return out;
}

}  // namespace

std::vector<Mat> rk4_matrix_ode(const Mat& x0, const std::vector<double>& grid,
                                const std::function<Mat(double, const Mat&)>& rhs,
                                bool symmetrize_steps, double blowup_threshold) {
  if (grid.size() < 2) throw std::invalid_argument("rk4_matrix_ode: need at least two nodes");
  std::vector<Mat> out;
  out.reserve(grid.size());
  Mat x = x0;
  out.push_back(x);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k];
    const double h = grid[k + 1] - grid[k];
    const Mat k1 = rhs(t, x);
    const Mat k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const Mat k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const Mat k4 = rhs(t + h, x + h * k3);
    x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (symmetrize_steps) x = symmetrized(x);
    if (!x.allFinite() || x.norm() > blowup_threshold) {
      throw BlowUpError("rk4_matrix_ode: finite escape near t = " + std::to_string(grid[k + 1]),
                        grid[k + 1]);
    }
    out.push_back(x);
  }
  return out;
}

std::vector<SymMat> integrate_pi(const SymMat& PiT, const Mat& A, const Mat& B,
                                 const std::vector<double>& grid) {
  const Mat BBt = B * B.transpose();
  auto rhs = [&](double, const Mat& pi) -> Mat {
    return -A.transpose() * pi - pi * A + pi * BBt * pi;
  };
  std::vector<double> reversed(grid.rbegin(), grid.rend());
  std::vector<Mat> back = rk4_matrix_ode(PiT.mat(), reversed, rhs);
  std::reverse(back.begin(), back.end());
  return to_symmetric(back);
}

std::vector<SymMat> integrate_h(const SymMat& H0, const std::vector<SymMat>& Pi, const Mat& A,
                                const Mat& B, const Mat& B1, const std::vector<double>& grid) {
  if (Pi.size() != grid.size()) {
    throw std::invalid_argument("integrate_h: Pi trajectory must be sampled on the grid");
  }
  const Mat BBt = B * B.transpose();
  const Mat D = BBt - B1 * B1.transpose();
  auto rhs = [&](double t, const Mat& h) -> Mat {
    const Mat pi = interp_traj(grid, Pi, t);
    const Mat s = pi + h;
    return -A.transpose() * h - h * A - h * BBt * h + s * D * s;
  };
  return to_symmetric(rk4_matrix_ode(H0.mat(), grid, rhs));
}

SchrodingerResiduals schrodinger_residual(const SchrodingerPair& pair,
                                          const SteeringProblem& problem) {
  const std::size_t nodes = pair.grid.size();
  if (nodes < 3 || pair.Pi.size() != nodes || pair.H.size() != nodes) {
    throw std::invalid_argument("schrodinger_residual: malformed pair");
  }
  const Mat& A = problem.A;
  const Mat BBt = problem.B * problem.B.transpose();
  const Mat D = BBt - problem.B1 * problem.B1.transpose();

  SchrodingerResiduals res;
  for (std::size_t k = 1; k + 1 < nodes; ++k) {
    const double dt = pair.grid[k + 1] - pair.grid[k - 1];
    const Mat dpi = (pair.Pi[k + 1].mat() - pair.Pi[k - 1].mat()) / dt;
    const Mat dh = (pair.H[k + 1].mat() - pair.H[k - 1].mat()) / dt;
    const Mat& pi = pair.Pi[k].mat();
    const Mat& h = pair.H[k].mat();
    const Mat s = pi + h;
    const Mat rhs_pi = -A.transpose() * pi - pi * A + pi * BBt * pi;
    const Mat rhs_h = -A.transpose() * h - h * A - h * BBt * h + s * D * s;
    res.ode_res_pi = std::max(res.ode_res_pi, (dpi - rhs_pi).norm());
    res.ode_res_h = std::max(res.ode_res_h, (dh - rhs_h).norm());
  }
  const Mat inv0 = problem.Sigma0.mat().inverse();
  const Mat invT = problem.SigmaT.mat().inverse();
  res.bc0_res = (inv0 - pair.Pi.front().mat() - pair.H.front().mat()).norm();
  res.bcT_res = (invT - pair.Pi.back().mat() - pair.H.back().mat()).norm();
  return res;
}

FixedPointResult fixed_point_iteration(const SteeringProblem& problem, const SymMat& PiT_init,
                                       int max_iters, int N) {
  problem.validate();
  if (max_iters < 0) throw std::invalid_argument("fixed_point_iteration: max_iters < 0");
  const std::vector<double> grid = uniform_grid(problem.T, N);
  const Mat inv0 = problem.Sigma0.mat().inverse();
  const Mat invT = problem.SigmaT.mat().inverse();

  FixedPointResult out;
  SymMat piT = PiT_init;

  auto half_cycle = [&](const SymMat& terminal) -> SchrodingerPair {
    SchrodingerPair pair;
    pair.grid = grid;
    pair.Pi = integrate_pi(terminal, problem.A, problem.B, grid);
    const SymMat h0(symmetrized(inv0 - pair.Pi.front().mat()));
    pair.H = integrate_h(h0, pair.Pi, problem.A, problem.B, problem.B1, grid);
    return pair;
  };

  try {
    out.pair = half_cycle(piT);
    for (int it = 0; it < max_iters; ++it) {
      const SymMat piT_next(symmetrized(invT - out.pair.H.back().mat()));
      const double delta = (piT_next.mat() - piT.mat()).norm();
      out.residual_history.push_back(delta);
      out.iterations = it + 1;
      piT = piT_next;
      out.pair = half_cycle(piT);
      if (delta < 1e-8) {
        out.status = IterationStatus::kConverged;
        return out;
      }
      const std::size_t win = 10;
      if (out.residual_history.size() > win) {
        bool growing = true;
        const std::size_t last = out.residual_history.size() - 1;
        for (std::size_t j = 0; j < win; ++j) {
          if (out.residual_history[last - j] <= out.residual_history[last - j - 1]) {
            growing = false;
            break;
          }
        }
        if (growing) {
          out.status = IterationStatus::kDiverged;
          return out;
        }
      }
    }
    out.status = IterationStatus::kMaxIters;
  } catch (const BlowUpError&) {
    out.status = IterationStatus::kDiverged;
  }
  return out;
}

std::vector<SymMat> propagate_covariance(const SymMat& Sigma0, const Mat& A, const Mat& B,
                                         const Mat& B1, const FeedbackPolicy& policy,
                                         const std::vector<double>& grid) {
  const Mat Q = B1 * B1.transpose();
  auto rhs = [&](double t, const Mat& s) -> Mat {
    const Mat acl = A - B * policy.at(t);
    return acl * s + s * acl.transpose() + Q;
  };
  std::vector<Mat> traj = rk4_matrix_ode(Sigma0.mat(), grid, rhs);
  std::vector<SymMat> out;
  out.reserve(traj.size());
  for (Mat& s : traj) out.emplace_back(clamp_psd(symmetrized(s)));
  return out;
}

FeedbackPolicy control_from_pi(const std::vector<double>& grid, const std::vector<SymMat>& Pi,
                               const Mat& B) {
  if (grid.size() != Pi.size()) {
    throw std::invalid_argument("control_from_pi: grid/trajectory size mismatch");
  }
  std::vector<Mat> gains;
  gains.reserve(Pi.size());
  for (const SymMat& pi : Pi) gains.push_back(B.transpose() * pi.mat());
  return FeedbackPolicy::Sampled(grid, std::move(gains));
}

}  // namespace covsteer
