#include "covsteer/types.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

namespace covsteer {

void SteeringProblem::validate() const {
  if (A.rows() != A.cols()) throw std::invalid_argument("problem: A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("problem: B row count must match A");
  if (B1.rows() != A.rows()) throw std::invalid_argument("problem: B1 row count must match A");
  if (!(T > 0.0)) throw std::invalid_argument("problem: horizon T must be positive");
  if (Sigma0.rows() != A.rows() || SigmaT.rows() != A.rows()) {
    throw std::invalid_argument("problem: boundary covariances must be n x n");
  }
  if (!(Sigma0.min_eigenvalue() > 0.0)) {
    throw std::invalid_argument("problem: Sigma0 must be positive definite");
  }
  if (!(SigmaT.min_eigenvalue() > 0.0)) {
    throw std::invalid_argument("problem: SigmaT must be positive definite");
  }
}

void StationaryProblem::validate() const {
  if (A.rows() != A.cols()) throw std::invalid_argument("problem: A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("problem: B row count must match A");
  if (B1.rows() != A.rows()) throw std::invalid_argument("problem: B1 row count must match A");
  if (Sigma.rows() != A.rows()) throw std::invalid_argument("problem: Sigma must be n x n");
  if (!(Sigma.min_eigenvalue() > 0.0)) {
    throw std::invalid_argument("problem: Sigma must be positive definite");
  }
}

FeedbackPolicy FeedbackPolicy::Constant(const Mat& K) {
  FeedbackPolicy p;
  p.constant_ = true;
  p.gains_ = {K};
  return p;
}

FeedbackPolicy FeedbackPolicy::Sampled(std::vector<double> grid, std::vector<Mat> gains) {
  if (grid.size() != gains.size() || grid.size() < 2) {
    throw std::invalid_argument("FeedbackPolicy: grid and gains must match, size >= 2");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw std::invalid_argument("FeedbackPolicy: grid must be strictly increasing");
    }
  }
  FeedbackPolicy p;
  p.constant_ = false;
  p.grid_ = std::move(grid);
  p.gains_ = std::move(gains);
  return p;
}

Mat FeedbackPolicy::at(double t) const {
  if (gains_.empty()) throw std::logic_error("FeedbackPolicy: empty policy");
  if (constant_) return gains_.front();
  if (t <= grid_.front()) return gains_.front();
  if (t >= grid_.back()) return gains_.back();
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - grid_.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - grid_[lo]) / (grid_[hi] - grid_[lo]);
  return (1.0 - w) * gains_[lo] + w * gains_[hi];
}

std::vector<double> uniform_grid(double T, int N) {
  if (!(T > 0.0) || N < 1) throw std::invalid_argument("uniform_grid: need T > 0 and N >= 1");
  std::vector<double> g(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) g[static_cast<std::size_t>(k)] = T * k / N;
  g.back() = T;
  return g;
}

}  // namespace covsteer
