#include "covsteer/problem_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace covsteer {

namespace {

using nlohmann::json;

Mat parse_matrix(const json& j, const std::string& key, Eigen::Index rows, Eigen::Index cols) {
  if (!j.contains(key)) throw ProblemFileError("problem file: missing key '" + key + "'");
  const json& arr = j.at(key);
  if (!arr.is_array()) throw ProblemFileError("problem file: '" + key + "' must be an array");

  std::vector<double> flat;
  if (!arr.empty() && arr.front().is_array()) {
    for (const auto& row : arr) {
      if (!row.is_array()) {
        throw ProblemFileError("problem file: '" + key + "' mixes scalars and rows");
      }
      for (const auto& v : row) {
        if (!v.is_number()) throw ProblemFileError("problem file: '" + key + "' has a non-number");
        flat.push_back(v.get<double>());
      }
    }
  } else {
    for (const auto& v : arr) {
      if (!v.is_number()) throw ProblemFileError("problem file: '" + key + "' has a non-number");
      flat.push_back(v.get<double>());
    }
  }
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw ProblemFileError("problem file: '" + key + "' has " + std::to_string(flat.size()) +
                           " entries, expected " + std::to_string(rows * cols));
  }
  Mat out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
      out(i, j2) = flat[static_cast<std::size_t>(i * cols + j2)];
    }
  }
  return out;
}

SymMat parse_covariance(const json& j, const std::string& key, Eigen::Index n) {
  const Mat m = parse_matrix(j, key, n, n);
  try {
    return SymMat(m);
  } catch (const std::invalid_argument& e) {
    throw ProblemFileError("problem file: '" + key + "': " + e.what());
  }
}

int parse_dim(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ProblemFileError("problem file: missing key '" + key + "'");
  if (!j.at(key).is_number_integer() || j.at(key).get<int>() <= 0) {
    throw ProblemFileError("problem file: '" + key + "' must be a positive integer");
  }
  return j.at(key).get<int>();
}

}  // namespace

ProblemFile parse_problem_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProblemFileError(std::string("problem file: JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ProblemFileError("problem file: top level must be an object");

  ProblemFile pf;
  const int n = parse_dim(j, "n");
  const int m = parse_dim(j, "m");
  const int p = parse_dim(j, "p");
  pf.A = parse_matrix(j, "A", n, n);
  pf.B = parse_matrix(j, "B", n, m);
  pf.B1 = parse_matrix(j, "B1", n, p);

  if (j.contains("T")) {
    if (!j.at("T").is_number() || !(j.at("T").get<double>() > 0.0)) {
      throw ProblemFileError("problem file: 'T' must be a positive number");
    }
    pf.T = j.at("T").get<double>();
  }
  if (j.contains("Sigma0")) pf.Sigma0 = parse_covariance(j, "Sigma0", n);
  if (j.contains("SigmaT")) pf.SigmaT = parse_covariance(j, "SigmaT", n);
  if (j.contains("Sigma")) pf.Sigma = parse_covariance(j, "Sigma", n);

  if (j.contains("grid")) pf.grid = j.at("grid").get<int>();
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    if (s.contains("dt")) pf.sim_dt = s.at("dt").get<double>();
    if (s.contains("paths")) pf.sim_paths = s.at("paths").get<int>();
    if (s.contains("seed")) pf.sim_seed = s.at("seed").get<std::uint64_t>();
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    if (s.contains("max_iters")) pf.max_iters = s.at("max_iters").get<int>();
    if (s.contains("tol")) pf.solver_tol = s.at("tol").get<double>();
  }
  if (j.contains("epsilon")) pf.epsilon = j.at("epsilon").get<double>();
  return pf;
}

ProblemFile load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProblemFileError("problem file: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem_json(ss.str());
}

SteeringProblem ProblemFile::steering() const {
  if (!T || !Sigma0 || !SigmaT) {
    throw ProblemFileError("problem file: finite-horizon run needs 'T', 'Sigma0' and 'SigmaT'");
  }
  SteeringProblem sp{A, B, B1, *T, *Sigma0, *SigmaT};
  try {
    sp.validate();
  } catch (const std::invalid_argument& e) {
    throw ProblemFileError(std::string("problem file: ") + e.what());
  }
  return sp;
}

StationaryProblem ProblemFile::stationary() const {
  const std::optional<SymMat>& target = Sigma ? Sigma : SigmaT;
  if (!target) {
    throw ProblemFileError("problem file: stationary run needs 'Sigma' (or 'SigmaT')");
  }
  StationaryProblem sp{A, B, B1, *target};
  try {
    sp.validate();
  } catch (const std::invalid_argument& e) {
    throw ProblemFileError(std::string("problem file: ") + e.what());
  }
  return sp;
}

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::string& path, const std::string& value_prefix,
                      const std::vector<double>& grid, const std::vector<Mat>& values,
                      const std::vector<std::string>& extra_headers,
                      const std::vector<std::vector<double>>& extra_columns) {
  if (values.size() != grid.size()) {
    throw std::invalid_argument("write_matrix_csv: grid/value size mismatch");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_matrix_csv: cannot open '" + path + "'");
  const Eigen::Index r = values.empty() ? 0 : values.front().rows();
  const Eigen::Index c = values.empty() ? 0 : values.front().cols();
  out << "t";
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      out << "," << value_prefix << "_" << i << j;
    }
  }
  for (const auto& h : extra_headers) out << "," << h;
  out << "\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out << format_full(grid[k]);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {
        out << "," << format_full(values[k](i, j));
      }
    }
    for (const auto& col : extra_columns) out << "," << format_full(col[k]);
    out << "\n";
  }
}

GainsFile read_gains_csv(const std::string& path, Eigen::Index m, Eigen::Index n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_gains_csv: cannot open '" + path + "'");
  GainsFile gf;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<Eigen::Index>(row.size()) < 1 + m * n) {
      throw std::runtime_error("read_gains_csv: row with too few columns");
    }
    gf.grid.push_back(row[0]);
    Mat K(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        K(i, j) = row[static_cast<std::size_t>(1 + i * n + j)];
      }
    }
    gf.K.push_back(K);
  }
  if (gf.grid.size() < 2) throw std::runtime_error("read_gains_csv: need at least two rows");
  return gf;
}

}  // namespace covsteer
