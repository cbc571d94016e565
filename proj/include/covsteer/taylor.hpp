#pragma once

#include <vector>

namespace covsteer {

/// Dense univariate polynomial in the monomial basis, low degree first.
/// Degrees stay small here (two-point Hermite data of modest order), so the
/// monomial basis is adequate.
class Poly {
 public:
  Poly() : c_{0.0} {}
  explicit Poly(std::vector<double> coeffs);
  static Poly Constant(double v) { return Poly({v}); }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  const std::vector<double>& coeffs() const { return c_; }

  double eval(double t) const;
  Poly derivative() const;

  /// Taylor coefficients p^{(j)}(t)/j! for j = 0..order (exact shift).
  std::vector<double> taylor_at(double t, int order) const;

  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator*(const Poly& o) const;
  Poly operator*(double s) const;

 private:
  std::vector<double> c_;
};

/// Two-point Hermite interpolant on [0, T]: matches value and the first
/// `order` derivatives at both endpoints, given as Taylor coefficients
/// (f^{(j)}/j!, j = 0..order). Degree 2*order + 1.
Poly hermite_two_point(double T, const std::vector<double>& taylor0,
                       const std::vector<double>& taylorT);

/// Taylor coefficients of log(f) from Taylor coefficients of f (f(0) > 0).
std::vector<double> log_taylor(const std::vector<double>& f);

/// Taylor coefficients of exp(f) from Taylor coefficients of f.
std::vector<double> exp_taylor(const std::vector<double>& f);

}  // namespace covsteer
