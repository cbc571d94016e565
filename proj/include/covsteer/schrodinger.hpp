#pragma once

#include "covsteer/types.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace covsteer {

/// Thrown when a Riccati integration escapes in finite time
/// (Frobenius norm above kBlowUpThreshold).
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, double escape_time)
      : std::runtime_error(what), escape_time_(escape_time) {}
  double escape_time() const { return escape_time_; }

 private:
  double escape_time_;
};

inline constexpr double kBlowUpThreshold = 1e12;

/// Coupled Riccati pair Pi(t), H(t) on a common grid. At a solution of the
/// steering problem, Sigma(t)^{-1} = Pi(t) + H(t).
struct SchrodingerPair {
  std::vector<double> grid;
  std::vector<SymMat> Pi;
  std::vector<SymMat> H;
};

struct SchrodingerResiduals {
  double ode_res_pi = 0.0;  // max over interior nodes, central differences
  double ode_res_h = 0.0;
  double bc0_res = 0.0;  // ||Sigma0^{-1} - Pi(0) - H(0)||_F
  double bcT_res = 0.0;  // ||SigmaT^{-1} - Pi(T) - H(T)||_F
};

enum class IterationStatus { kConverged, kDiverged, kMaxIters };

struct FixedPointResult {
  IterationStatus status = IterationStatus::kMaxIters;
  SchrodingerPair pair;
  std::vector<double> residual_history;  // ||Pi(T)_new - Pi(T)_old||_F per cycle
  int iterations = 0;
};

/// Classical fixed-step RK4 on a matrix ODE over consecutive grid nodes.
/// Integrates backward when the grid is passed in descending order. Each step
/// is optionally symmetrized; throws BlowUpError past kBlowUpThreshold.
std::vector<Mat> rk4_matrix_ode(const Mat& x0, const std::vector<double>& grid,
                                const std::function<Mat(double, const Mat&)>& rhs,
                                bool symmetrize_steps = true,
                                double blowup_threshold = kBlowUpThreshold);

/// Pi' = -A'Pi - Pi A + Pi B B' Pi, integrated backward from Pi(T) = PiT.
/// Result is stored on the ascending grid.
std::vector<SymMat> integrate_pi(const SymMat& PiT, const Mat& A, const Mat& B,
                                 const std::vector<double>& grid);

/// H' = -A'H - H A - H B B' H + (Pi + H)(B B' - B1 B1')(Pi + H), forward from
/// H(0) = H0, with Pi interpolated linearly in t between its grid nodes.
std::vector<SymMat> integrate_h(const SymMat& H0, const std::vector<SymMat>& Pi,
                                const Mat& A, const Mat& B, const Mat& B1,
                                const std::vector<double>& grid);

SchrodingerResiduals schrodinger_residual(const SchrodingerPair& pair,
                                          const SteeringProblem& problem);

/// Successive-approximation cycle for the coupled system: integrate Pi
/// backward from Pi(T), set H(0) = Sigma0^{-1} - Pi(0), integrate H forward,
/// update Pi(T) = SigmaT^{-1} - H(T), repeat. Experimental: the scheme has no
/// convergence guarantee, and divergence is a correctly reported outcome.
/// Converged when successive Pi(T) iterates differ by < 1e-8 in Frobenius
/// norm; diverged on blow-up or on residual growth over 10 consecutive
/// cycles. With max_iters = 0 the returned pair is the initialization (Pi
/// integrated from PiT_init, H matched at t=0).
FixedPointResult fixed_point_iteration(const SteeringProblem& problem, const SymMat& PiT_init,
                                       int max_iters, int N = 400);

/// Sigma' = (A - B K(t)) Sigma + Sigma (A - B K(t))' + B1 B1' under the
/// policy, RK4 on the grid. Steps are symmetrized and clamped to the PSD cone
/// (negative eigenvalues beyond roundoff should not occur on sane grids).
std::vector<SymMat> propagate_covariance(const SymMat& Sigma0, const Mat& A, const Mat& B,
                                         const Mat& B1, const FeedbackPolicy& policy,
                                         const std::vector<double>& grid);

/// K(t_k) = B' Pi(t_k).
FeedbackPolicy control_from_pi(const std::vector<double>& grid, const std::vector<SymMat>& Pi,
                               const Mat& B);

}  // namespace covsteer
