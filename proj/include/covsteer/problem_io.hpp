#pragma once

#include "covsteer/types.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace covsteer {

class ProblemFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parsed problem document. Keys: n, m, p, A, B, B1 (row-major arrays), plus
/// T/Sigma0/SigmaT for finite-horizon steering and/or Sigma for stationary
/// maintenance, and optional solver/grid/simulation overrides.
struct ProblemFile {
  Mat A, B, B1;
  std::optional<double> T;
  std::optional<SymMat> Sigma0;
  std::optional<SymMat> SigmaT;
  std::optional<SymMat> Sigma;

  std::optional<int> grid;
  std::optional<double> sim_dt;
  std::optional<int> sim_paths;
  std::optional<std::uint64_t> sim_seed;
  std::optional<double> epsilon;
  std::optional<int> max_iters;
  std::optional<double> solver_tol;

  /// Throws ProblemFileError when the finite-horizon keys are missing.
  SteeringProblem steering() const;

  /// Stationary target: Sigma when present, otherwise SigmaT.
  StationaryProblem stationary() const;
};

ProblemFile load_problem_file(const std::string& path);
ProblemFile parse_problem_json(const std::string& text);

/// CSV helpers. All numeric output uses 17 significant digits; the first
/// column is always t and matrices are flattened row-major.
void write_matrix_csv(const std::string& path, const std::string& value_prefix,
                      const std::vector<double>& grid, const std::vector<Mat>& values,
                      const std::vector<std::string>& extra_headers = {},
                      const std::vector<std::vector<double>>& extra_columns = {});

struct GainsFile {
  std::vector<double> grid;
  std::vector<Mat> K;  // m x n per node
};

/// Reads a gains.csv produced by the steer command (t, k_00, k_01, ...).
GainsFile read_gains_csv(const std::string& path, Eigen::Index m, Eigen::Index n);

std::string format_full(double v);

}  // namespace covsteer
