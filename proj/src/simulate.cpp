#include "covsteer/simulate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace covsteer {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double to_unit(std::uint64_t x) {
  // 53-bit mantissa in (0, 1].
  return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                      std::uint64_t index) {
  const std::uint64_t pair_index = index / 2;
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ path);
  key = splitmix64(key ^ (step * 0x9E3779B97F4A7C15ULL + 1));
  const std::uint64_t u1 = splitmix64(key ^ (2 * pair_index));
  const std::uint64_t u2 = splitmix64(key ^ (2 * pair_index + 1));
  const double radius = std::sqrt(-2.0 * std::log(to_unit(u1)));
  const double angle = 2.0 * M_PI * to_unit(u2);
  return (index % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
}

namespace {

// Factor L with Sigma = L L' for sampling; eigendecomposition when the LLT
// fails on a semidefinite matrix.
Mat sampling_factor(const SymMat& sigma) {
  Eigen::LLT<Mat> llt(sigma.mat());
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma.mat());
  if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + sigma.mat().norm())) {
    throw std::invalid_argument("euler_maruyama_ensemble: Sigma0 is not PSD");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

constexpr std::uint64_t kInitialDrawStep = ~std::uint64_t{0};

EnsembleResult run_ensemble(const Mat& A, const Mat& B, const Mat& B1,
                            const FeedbackPolicy& policy, const Mat* initial_states,
                            const SymMat* Sigma0, double t0, double T, const SimConfig& config,
                            std::uint64_t step_offset) {
  const Eigen::Index n = A.rows();
  const Eigen::Index p = B1.cols();
  if (!(config.dt > 0.0) || !(T > 0.0)) {
    throw std::invalid_argument("euler_maruyama_ensemble: dt and T must be positive");
  }
  if (config.n_paths < 2) {
    throw std::invalid_argument("euler_maruyama_ensemble: need at least two paths");
  }
  const double steps_real = T / config.dt;
  const int steps = static_cast<int>(std::lround(steps_real));
  if (steps < 1 || std::abs(steps_real - steps) > 1e-9 * steps) {
    throw std::invalid_argument("euler_maruyama_ensemble: dt must divide the horizon");
  }

  // Per-step drift matrices and the per-step gain, precomputed once.
  std::vector<Mat> drift(static_cast<std::size_t>(steps));
  std::vector<Mat> gain(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * config.dt;
    gain[static_cast<std::size_t>(k)] = policy.at(t);
    drift[static_cast<std::size_t>(k)] =
        Mat::Identity(n, n) + config.dt * (A - B * gain[static_cast<std::size_t>(k)]);
  }
  const Mat noise_in = std::sqrt(config.dt) * B1;
  const Mat factor = Sigma0 ? sampling_factor(*Sigma0) : Mat();

  EnsembleResult out;
  out.stats.grid.resize(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) out.stats.grid[static_cast<std::size_t>(k)] = t0 + k * config.dt;
  out.stats.grid.back() = t0 + T;
  out.stats.n_paths = config.n_paths;
  std::vector<Vec> sum(static_cast<std::size_t>(steps) + 1, Vec::Zero(n));
  std::vector<Mat> sum2(static_cast<std::size_t>(steps) + 1, Mat::Zero(n, n));
  out.final_states.resize(n, config.n_paths);

  const int stored = config.store_paths ? std::min(config.n_paths, config.store_paths_limit) : 0;
  out.paths.resize(static_cast<std::size_t>(stored));

  Vec x(n), xi(p);
  for (int path = 0; path < config.n_paths; ++path) {
    if (Sigma0) {
      Vec g(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        g(i) = counter_normal(config.seed, static_cast<std::uint64_t>(path), kInitialDrawStep,
                              static_cast<std::uint64_t>(i));
      }
      x = factor * g;
    } else {
      x = initial_states->col(path);
    }
    StoredPath* rec = path < stored ? &out.paths[static_cast<std::size_t>(path)] : nullptr;
    if (rec) {
      rec->path_index = path;
      rec->states.reserve(static_cast<std::size_t>(steps) + 1);
      rec->controls.reserve(static_cast<std::size_t>(steps));
      rec->states.push_back(x);
    }
    sum[0] += x;
    sum2[0] += x * x.transpose();
    for (int k = 0; k < steps; ++k) {
      for (Eigen::Index i = 0; i < p; ++i) {
        xi(i) = counter_normal(config.seed, static_cast<std::uint64_t>(path),
                               step_offset + static_cast<std::uint64_t>(k),
                               static_cast<std::uint64_t>(i));
      }
      if (rec) rec->controls.push_back(-gain[static_cast<std::size_t>(k)] * x);
      x = drift[static_cast<std::size_t>(k)] * x + noise_in * xi;
      sum[static_cast<std::size_t>(k) + 1] += x;
      sum2[static_cast<std::size_t>(k) + 1] += x * x.transpose();
      if (rec) rec->states.push_back(x);
    }
    out.final_states.col(path) = x;
  }

  out.stats.mean.reserve(sum.size());
  out.stats.cov.reserve(sum.size());
  const double inv_paths = 1.0 / static_cast<double>(config.n_paths);
  for (std::size_t k = 0; k < sum.size(); ++k) {
    out.stats.mean.push_back(sum[k] * inv_paths);
    out.stats.cov.emplace_back(symmetrized(sum2[k] * inv_paths));
  }
  return out;
}

}  // namespace

EnsembleResult euler_maruyama_ensemble(const Mat& A, const Mat& B, const Mat& B1,
                                       const FeedbackPolicy& policy, const SymMat& Sigma0,
                                       double T, const SimConfig& config, double t0,
                                       std::uint64_t step_offset) {
  return run_ensemble(A, B, B1, policy, nullptr, &Sigma0, t0, T, config, step_offset);
}

EnsembleResult euler_maruyama_ensemble_from_states(const Mat& A, const Mat& B, const Mat& B1,
                                                   const FeedbackPolicy& policy,
                                                   const Mat& initial_states, double t0, double T,
                                                   const SimConfig& config,
                                                   std::uint64_t step_offset) {
  if (initial_states.cols() != config.n_paths || initial_states.rows() != A.rows()) {
    throw std::invalid_argument(
        "euler_maruyama_ensemble_from_states: initial states must be n x n_paths");
  }
  return run_ensemble(A, B, B1, policy, &initial_states, nullptr, t0, T, config, step_offset);
}

namespace {

Mat fourth_moment_se(const Mat& cov, int n_paths) {
  const Eigen::Index n = cov.rows();
  Mat se(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      se(i, j) = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) /
                           static_cast<double>(n_paths));
    }
  }
  return se;
}

}  // namespace

CovarianceEstimate empirical_covariance(const EnsembleStats& stats, double t) {
  const double span = stats.grid.back() - stats.grid.front();
  for (std::size_t k = 0; k < stats.grid.size(); ++k) {
    if (std::abs(stats.grid[k] - t) <= 1e-9 * (1.0 + span)) {
      return CovarianceEstimate{stats.cov[k], fourth_moment_se(stats.cov[k].mat(), stats.n_paths),
                                stats.n_paths};
    }
  }
  throw std::invalid_argument("empirical_covariance: t = " + std::to_string(t) +
                              " is not a grid node");
}

CovarianceEstimate empirical_covariance(const Mat& states) {
  const int n_paths = static_cast<int>(states.cols());
  if (n_paths < 2) throw std::invalid_argument("empirical_covariance: need at least two samples");
  const Mat cov = symmetrized(states * states.transpose() / static_cast<double>(n_paths));
  return CovarianceEstimate{SymMat(cov), fourth_moment_se(cov, n_paths), n_paths};
}

ComparisonReport compare_covariance(const SymMat& Sigma_hat, const SymMat& Sigma_target,
                                    int n_paths) {
  if (Sigma_hat.rows() != Sigma_target.rows()) {
    throw std::invalid_argument("compare_covariance: dimension mismatch");
  }
  ComparisonReport report;
  report.frobenius_gap = (Sigma_hat.mat() - Sigma_target.mat()).norm();
  const Mat se = fourth_moment_se(Sigma_hat.mat(), n_paths);
  const Eigen::Index n = Sigma_hat.rows();
  report.z_scores.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double diff = Sigma_hat(i, j) - Sigma_target(i, j);
      report.z_scores(i, j) = se(i, j) > 0.0 ? diff / se(i, j) : (diff == 0.0 ? 0.0 : 1e300);
    }
  }
  report.pass = report.z_scores.cwiseAbs().maxCoeff() <= 3.5;
  return report;
}

}  // namespace covsteer
