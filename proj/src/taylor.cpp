#include "covsteer/taylor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

namespace covsteer {

Poly::Poly(std::vector<double> coeffs) : c_(std::move(coeffs)) {
  if (c_.empty()) c_.push_back(0.0);
}

double Poly::eval(double t) const {
  double v = 0.0;
  for (std::size_t i = c_.size(); i-- > 0;) v = v * t + c_[i];
  return v;
}

Poly Poly::derivative() const {
  if (c_.size() == 1) return Poly::Constant(0.0);
  std::vector<double> d(c_.size() - 1);
  for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = c_[i] * static_cast<double>(i);
  return Poly(std::move(d));
}

std::vector<double> Poly::taylor_at(double t, int order) const {
  // In-place Taylor shift by repeated synthetic division.
  std::vector<double> a = c_;
  const int deg = degree();
  for (int j = 0; j <= deg; ++j) {
    for (int i = deg - 1; i >= j; --i) a[static_cast<std::size_t>(i)] += t * a[static_cast<std::size_t>(i) + 1];
  }
  a.resize(static_cast<std::size_t>(order) + 1, 0.0);
  return a;
}

Poly Poly::operator+(const Poly& o) const {
  std::vector<double> r(std::max(c_.size(), o.c_.size()), 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i) r[i] += c_[i];
  for (std::size_t i = 0; i < o.c_.size(); ++i) r[i] += o.c_[i];
  return Poly(std::move(r));
}

Poly Poly::operator-(const Poly& o) const { return *this + o * (-1.0); }

Poly Poly::operator*(const Poly& o) const {
  std::vector<double> r(c_.size() + o.c_.size() - 1, 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i) {
    for (std::size_t j = 0; j < o.c_.size(); ++j) r[i + j] += c_[i] * o.c_[j];
  }
  return Poly(std::move(r));
}

Poly Poly::operator*(double s) const {
  std::vector<double> r = c_;
  for (double& v : r) v *= s;
  return Poly(std::move(r));
}

Poly hermite_two_point(double T, const std::vector<double>& taylor0,
                       const std::vector<double>& taylorT) {
  if (taylor0.size() != taylorT.size() || taylor0.empty()) {
    throw std::invalid_argument("hermite_two_point: jet sizes must match and be nonempty");
  }
  if (!(T > 0.0)) throw std::invalid_argument("hermite_two_point: T must be positive");
  const std::size_t r1 = taylor0.size();  // conditions per endpoint
  const std::size_t nn = 2 * r1;          // total nodes (with repetition)

  std::vector<double> nodes(nn);
  for (std::size_t i = 0; i < r1; ++i) nodes[i] = 0.0;
  for (std::size_t i = r1; i < nn; ++i) nodes[i] = T;

  // Divided differences with repeated nodes: f[x_i..x_{i+k}] equals the k-th
  // Taylor coefficient when all nodes coincide.
  std::vector<std::vector<double>> dd(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    dd[i].resize(nn - i);
    dd[i][0] = (i < r1) ? taylor0[0] : taylorT[0];
  }
  for (std::size_t k = 1; k < nn; ++k) {
    for (std::size_t i = 0; i + k < nn; ++i) {
      if (nodes[i] == nodes[i + k]) {
        dd[i][k] = (nodes[i] == 0.0) ? taylor0[k] : taylorT[k];
      } else {
        dd[i][k] = (dd[i + 1][k - 1] - dd[i][k - 1]) / (nodes[i + k] - nodes[i]);
      }
    }
  }

  // Newton form to monomial basis, Horner style.
  Poly p = Poly::Constant(dd[0][nn - 1]);
  for (std::size_t k = nn - 1; k-- > 0;) {
    p = p * Poly({-nodes[k], 1.0}) + Poly::Constant(dd[0][k]);
  }
  return p;
}

std::vector<double> log_taylor(const std::vector<double>& f) {
  if (f.empty() || !(f[0] > 0.0)) {
    throw std::invalid_argument("log_taylor: leading coefficient must be positive");
  }
  std::vector<double> h(f.size());
  h[0] = std::log(f[0]);
  // From f = exp(h): j f_j = sum_{i=1..j} i h_i f_{j-i}.
  for (std::size_t j = 1; j < f.size(); ++j) {
    double acc = static_cast<double>(j) * f[j];
    for (std::size_t i = 1; i < j; ++i) acc -= static_cast<double>(i) * h[i] * f[j - i];
    h[j] = acc / (static_cast<double>(j) * f[0]);
  }
  return h;
}

std::vector<double> exp_taylor(const std::vector<double>& f) {
  std::vector<double> g(f.size());
  g[0] = std::exp(f[0]);
  for (std::size_t j = 1; j < f.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 1; i <= j; ++i) acc += static_cast<double>(i) * f[i] * g[j - i];
    g[j] = acc / static_cast<double>(j);
  }
  return g;
}

}  // namespace covsteer
