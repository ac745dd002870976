#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "rmbias/jet.hpp"
#include "rmbias/polynomial.hpp"

namespace rmbias {

/// Closed interval [lo, hi]; used to restrict jump sums.
struct Interval {
  double lo;
  double hi;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Polynomial pieces on (lo, hi) separated by interior breakpoints.
///
/// Piece i lives on the half-open cell [b_{i-1}, b_i), so evaluation exactly at a
/// breakpoint uses the piece to its right. The right endpoint `hi` is evaluated with
/// the last piece (continuous extension), which boundary terms rely on.
class PiecewiseFunction1D {
 public:
  PiecewiseFunction1D(double lo, double hi, std::vector<double> breakpoints,
                      std::vector<Polynomial> pieces);

  static PiecewiseFunction1D single(double lo, double hi, Polynomial p);
  static PiecewiseFunction1D piecewise_constant(double lo, double hi, std::vector<double> breakpoints,
                                                const std::vector<double>& values);

  double domain_lo() const { return lo_; }
  double domain_hi() const { return hi_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Polynomial>& pieces() const { return pieces_; }

  /// {lo, breakpoints..., hi}
  std::vector<double> knots() const;

  /// Index of the piece owning x. Throws DomainError outside [lo, hi].
  std::size_t piece_index(double x) const;

  /// Value (order 0) or classical derivative (order 1, 2) at x.
  double evaluate(double x, int derivative_order = 0) const;
  Jet2 jet(double x) const;

  /// Same as evaluate, but at a breakpoint uses the piece on the left.
  double left_limit(double x, int derivative_order = 0) const;

  bool all_pieces_constant() const;

 private:
  double lo_;
  double hi_;
  std::vector<double> breakpoints_;
  std::vector<Polynomial> pieces_;
};

/// A = chi * a_bar with chi piecewise constant and a_bar a single C^1 polynomial.
class CoefficientDecomposition {
 public:
  CoefficientDecomposition(PiecewiseFunction1D chi, Polynomial a_bar);

  const PiecewiseFunction1D& chi() const { return chi_; }
  const Polynomial& a_bar() const { return a_bar_; }
  double domain_lo() const { return chi_.domain_lo(); }
  double domain_hi() const { return chi_.domain_hi(); }

  double A(double x) const { return chi_.evaluate(x) * a_bar_(x); }
  /// Absolutely continuous part of A': chi * a_bar'. The jump part is not included.
  double dA_abs(double x) const { return chi_.evaluate(x) * a_bar_.derivative_at(x, 1); }
  /// Classical derivative of A off the jump set, via the product rule on both factors.
  double dA_classical(double x) const;

  /// A restricted to chi's piece `piece` (so knots can be approached from either side).
  double A_on_piece(std::size_t piece, double x) const;
  double dA_abs_on_piece(std::size_t piece, double x) const;

  bool piecewise_constant() const { return a_bar_.is_constant(); }

  double chi_min() const { return chi_min_; }
  double chi_max() const { return chi_max_; }
  double lambda() const { return lambda_; }
  double Lambda() const { return Lambda_; }

 private:
  PiecewiseFunction1D chi_;
  Polynomial a_bar_;
  double chi_min_ = 0.0;
  double chi_max_ = 0.0;
  double lambda_ = 0.0;
  double Lambda_ = 0.0;
};

/// One jump of chi: one-sided limits and orientation. ((chi+, chi-), nu) and
/// ((chi-, chi+), -nu) describe the same jump.
struct JumpRecord {
  double location;
  double chi_plus;
  double chi_minus;
  int nu = +1;

  JumpRecord flipped() const { return {location, chi_minus, chi_plus, -nu}; }
  /// (chi+ - chi-) * nu, the orientation-free jump size.
  double oriented_jump() const { return (chi_plus - chi_minus) * nu; }
};

/// Jumps of chi with chi+ = right limit and nu = +1. Breakpoints without a jump are skipped.
std::vector<JumpRecord> jump_set(const CoefficientDecomposition& decomp);

using ScalarFunction = std::function<double(double)>;

/// Per-jump terms (chi+ - chi-) nu a_bar(j) phi'(j) for jumps inside `subset`.
std::vector<double> mu_contributions(const std::vector<JumpRecord>& jumps, const Polynomial& a_bar,
                                     const ScalarFunction& phi_prime,
                                     std::optional<Interval> subset = std::nullopt);

double mu_functional(const std::vector<JumpRecord>& jumps, const Polynomial& a_bar,
                     const ScalarFunction& phi_prime, std::optional<Interval> subset = std::nullopt);

double mu_functional(const CoefficientDecomposition& decomp, const ScalarFunction& phi_prime,
                     std::optional<Interval> subset = std::nullopt);

}  // namespace rmbias
