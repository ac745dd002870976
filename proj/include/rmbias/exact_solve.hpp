#pragma once

#include <iosfwd>
#include <string>
#include <optional>
#include <vector>

#include "rmbias/jet.hpp"
#include "rmbias/piecewise.hpp"

namespace rmbias {

/// -(A u')' = f on (lo, hi), u = 0 at both ends, with A = chi * a_bar.
class BVPProblem {
 public:
  BVPProblem(CoefficientDecomposition decomp, PiecewiseFunction1D f);

  const CoefficientDecomposition& decomp() const { return decomp_; }
  const PiecewiseFunction1D& f() const { return f_; }
  double domain_lo() const { return decomp_.domain_lo(); }
  double domain_hi() const { return decomp_.domain_hi(); }
  double measure() const { return domain_hi() - domain_lo(); }

  /// Sorted union of {lo, hi}, chi breakpoints and f breakpoints.
  const std::vector<double>& knots() const { return knots_; }

 private:
  CoefficientDecomposition decomp_;
  PiecewiseFunction1D f_;
  std::vector<double> knots_;
};

enum class Provenance { closed_form, ode };
enum class EquationForm { original, modified };

/// Reference solution. Either an exact piecewise polynomial, or a dense grid of
/// (x, u, u') from the shooting solver with cubic Hermite interpolation between nodes.
/// u'' is recovered pointwise from the equation: u'' = (-f - (D^a A) u') / A off the jumps.
class SolutionFunction {
 public:
  SolutionFunction(PiecewiseFunction1D closed_form, EquationForm form);
  /// Grid form. `derivs_left`/`derivs_right` are the one-sided derivatives at each node;
  /// they differ only at jumps of the original-form solution.
  SolutionFunction(std::vector<double> xs, std::vector<double> values, std::vector<double> derivs_left,
                   std::vector<double> derivs_right, const BVPProblem& problem, EquationForm form);

  Provenance provenance() const { return provenance_; }
  EquationForm form() const { return form_; }
  double domain_lo() const;
  double domain_hi() const;

  /// Present for closed-form solutions only.
  const std::optional<PiecewiseFunction1D>& closed_form() const { return closed_form_; }

  double value(double x) const { return jet(x).value; }
  double derivative(double x) const { return jet(x).d1; }
  Jet2 jet(double x) const;
  JetFunction as_function() const;

  /// CSV rows "x,value,derivative" on `points` equispaced nodes including both ends.
  void write_csv(std::ostream& os, int points, const std::string& comment = {}) const;

 private:
  Provenance provenance_;
  EquationForm form_;
  std::optional<PiecewiseFunction1D> closed_form_;
  std::vector<double> xs_, values_, derivs_left_, derivs_right_;
  std::optional<BVPProblem> problem_;
};

struct SolverOptions {
  int rk_steps_per_interval = 256;
  /// Use the shooting path even when the closed form applies.
  bool force_ode = false;
};

SolutionFunction solve_original(const BVPProblem& problem, const SolverOptions& options = {});
SolutionFunction solve_modified(const BVPProblem& problem, const SolverOptions& options = {});

struct DiracAtom {
  double location;
  double weight;
};

/// sum_k weight_k * delta_{location_k}
struct DiracCombination {
  std::vector<DiracAtom> atoms;
};

/// Tf - f = -sum_k a_k u~'(j_k) delta_{j_k} with a_k = (chi+ - chi-) nu a_bar(j_k).
DiracCombination rm_transform(const BVPProblem& problem, const SolverOptions& options = {});

struct KernelVerdict {
  bool in_kernel;
  double tolerance;
  double max_abs_weight;
  DiracCombination per_jump;  ///< one atom per jump, weight of Tf - f there
};

inline constexpr double kDefaultKernelTolerance = 1e-9;

/// f lies in Ker(T - I) iff every jump weight of Tf - f is within `tol` of zero.
KernelVerdict kernel_membership(const BVPProblem& problem, double tol = kDefaultKernelTolerance,
                                const SolverOptions& options = {});

/// H^{-1}(lo, hi) norm dual to the full H^1_0 norm, via the Green's function of -d^2/dx^2 + 1.
double h_minus_one_norm(const DiracCombination& g, double lo, double hi);

}  // namespace rmbias
