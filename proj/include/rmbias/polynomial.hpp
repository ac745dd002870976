#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace rmbias {

/// Dense polynomial in the global variable x, coefficients in ascending degree.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coefficients);
  Polynomial(std::initializer_list<double> coefficients);

  static Polynomial constant(double c) { return Polynomial({c}); }

  double operator()(double x) const;

  /// Value of the k-th derivative at x.
  double derivative_at(double x, int order) const;

  Polynomial derivative() const;

  /// Antiderivative that vanishes at `anchor`.
  Polynomial antiderivative(double anchor) const;

  /// Degree after dropping trailing zeros; the zero polynomial has degree 0.
  std::size_t degree() const;
  bool is_constant() const { return degree() == 0; }

  const std::vector<double>& coefficients() const { return coeffs_; }

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

 private:
  std::vector<double> coeffs_{0.0};
};

}  // namespace rmbias
