#pragma once

#include "rmbias/exact_solve.hpp"

namespace rmbias::testing {

// A = 1/2 on (-1,0), 1 on [0,1) with a_bar = 1.
inline CoefficientDecomposition failure_decomp() {
  return {PiecewiseFunction1D::piecewise_constant(-1, 1, {0.0}, {0.5, 1.0}), Polynomial{1.0}};
}

// f = 0 / -2: u and utilde differ.
inline BVPProblem failure_problem() {
  return {failure_decomp(), PiecewiseFunction1D::piecewise_constant(-1, 1, {0.0}, {0.0, -2.0})};
}

// f = -1 / -2: u = utilde = x^2 - 1.
inline BVPProblem invariant_problem() {
  return {failure_decomp(), PiecewiseFunction1D::piecewise_constant(-1, 1, {0.0}, {-1.0, -2.0})};
}

inline BVPProblem zero_source_problem() {
  return {failure_decomp(), PiecewiseFunction1D::piecewise_constant(-1, 1, {}, {0.0})};
}

// Closed forms written out independently of the solver.
inline double u_exact(double x) { return x < 0 ? -2.0 / 3.0 * x - 2.0 / 3.0 : x * x - x / 3.0 - 2.0 / 3.0; }
inline double du_exact(double x) { return x < 0 ? -2.0 / 3.0 : 2.0 * x - 1.0 / 3.0; }
inline double ut_exact(double x) { return x < 0 ? -x / 2.0 - 0.5 : x * x - x / 2.0 - 0.5; }
inline double dut_exact(double x) { return x < 0 ? -0.5 : 2.0 * x - 0.5; }

}  // namespace rmbias::testing
