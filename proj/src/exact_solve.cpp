#include "rmbias/exact_solve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <sstream>

#include "rmbias/errors.hpp"

namespace rmbias {

BVPProblem::BVPProblem(CoefficientDecomposition decomp, PiecewiseFunction1D f)
    : decomp_(std::move(decomp)), f_(std::move(f)) {
  if (f_.domain_lo() != decomp_.domain_lo() || f_.domain_hi() != decomp_.domain_hi())
    throw ConfigError("f and the coefficient must share the same domain");
  knots_ = decomp_.chi().knots();
  knots_.insert(knots_.end(), f_.breakpoints().begin(), f_.breakpoints().end());
  std::sort(knots_.begin(), knots_.end());
  knots_.erase(std::unique(knots_.begin(), knots_.end()), knots_.end());
}

// ---------------------------------------------------------------------------
// SolutionFunction

SolutionFunction::SolutionFunction(PiecewiseFunction1D closed_form, EquationForm form)
    : provenance_(Provenance::closed_form), form_(form), closed_form_(std::move(closed_form)) {}

SolutionFunction::SolutionFunction(std::vector<double> xs, std::vector<double> values,
                                   std::vector<double> derivs_left, std::vector<double> derivs_right,
                                   const BVPProblem& problem, EquationForm form)
    : provenance_(Provenance::ode),
      form_(form),
      xs_(std::move(xs)),
      values_(std::move(values)),
      derivs_left_(std::move(derivs_left)),
      derivs_right_(std::move(derivs_right)),
      problem_(problem) {
  if (xs_.size() < 2 || values_.size() != xs_.size() || derivs_left_.size() != xs_.size() ||
      derivs_right_.size() != xs_.size())
    throw ConfigError("solution grid: inconsistent array sizes");
}

double SolutionFunction::domain_lo() const {
  return closed_form_ ? closed_form_->domain_lo() : xs_.front();
}

double SolutionFunction::domain_hi() const {
  return closed_form_ ? closed_form_->domain_hi() : xs_.back();
}

Jet2 SolutionFunction::jet(double x) const {
  if (closed_form_) return closed_form_->jet(x);
  if (!(x >= xs_.front() && x <= xs_.back())) {
    std::ostringstream os;
    os << "x = " << x << " outside the solution grid";
    throw DomainError(os.str());
  }
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t n = static_cast<std::size_t>(it - xs_.begin());
  n = (n == 0) ? 0 : n - 1;
  if (n + 1 >= xs_.size()) n = xs_.size() - 2;

  const double h = xs_[n + 1] - xs_[n];
  const double t = (x - xs_[n]) / h;
  const double y0 = values_[n], y1 = values_[n + 1];
  const double m0 = derivs_right_[n], m1 = derivs_left_[n + 1];
  const double t2 = t * t, t3 = t2 * t;
  Jet2 j;
  j.value = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1 +
            (t3 - t2) * h * m1;
  j.d1 = (6 * t2 - 6 * t) / h * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) / h * y1 +
         (3 * t2 - 2 * t) * m1;
  const CoefficientDecomposition& d = problem_->decomp();
  j.d2 = (-problem_->f().evaluate(x) - d.dA_abs(x) * j.d1) / d.A(x);
  return j;
}

JetFunction SolutionFunction::as_function() const {
  return [self = *this](double x) { return self.jet(x); };
}

void SolutionFunction::write_csv(std::ostream& os, int points, const std::string& comment) const {
  if (points < 2) throw ConfigError("csv grid needs at least 2 points");
  const auto old_precision = os.precision(17);
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "x,value,derivative\n";
  const double lo = domain_lo(), hi = domain_hi();
  for (int i = 0; i < points; ++i) {
    const double x = (i == points - 1) ? hi : lo + (hi - lo) * i / (points - 1);
    const Jet2 j = jet(x);
    os << x << ',' << j.value << ',' << j.d1 << '\n';
  }
  os.precision(old_precision);
}

// ---------------------------------------------------------------------------
// Solvers

namespace {

struct Cell {
  double left;
  double right;
  std::size_t chi_piece;
  const Polynomial* f_piece;
};

std::vector<Cell> cells_of(const BVPProblem& problem) {
  const auto& k = problem.knots();
  std::vector<Cell> cells;
  for (std::size_t i = 0; i + 1 < k.size(); ++i) {
    const double mid = 0.5 * (k[i] + k[i + 1]);
    cells.push_back({k[i], k[i + 1], problem.decomp().chi().piece_index(mid),
                     &problem.f().pieces()[problem.f().piece_index(mid)]});
  }
  return cells;
}

std::vector<double> interior(const std::vector<double>& knots) {
  return {knots.begin() + 1, knots.end() - 1};
}

SolutionFunction closed_form_original(const BVPProblem& problem) {
  const auto cells = cells_of(problem);
  const auto& d = problem.decomp();
  std::vector<Polynomial> U, V;
  double F_left = 0.0, U_left = 0.0, V_left = 0.0;
  for (const Cell& c : cells) {
    const double a = d.A_on_piece(c.chi_piece, c.left);
    const Polynomial F = Polynomial::constant(F_left) + c.f_piece->antiderivative(c.left);
    const Polynomial Ui = Polynomial::constant(U_left) + (-1.0 / a) * F.antiderivative(c.left);
    const Polynomial Vi = Polynomial({V_left - c.left / a, 1.0 / a});
    F_left = F(c.right);
    U_left = Ui(c.right);
    V_left = Vi(c.right);
    U.push_back(Ui);
    V.push_back(Vi);
  }
  // flux constant c chosen so that u(hi) = 0
  const double flux0 = -U_left / V_left;
  std::vector<Polynomial> pieces;
  for (std::size_t i = 0; i < cells.size(); ++i) pieces.push_back(flux0 * V[i] + U[i]);
  return SolutionFunction(PiecewiseFunction1D(problem.domain_lo(), problem.domain_hi(),
                                              interior(problem.knots()), std::move(pieces)),
                          EquationForm::original);
}

SolutionFunction closed_form_modified(const BVPProblem& problem) {
  const auto cells = cells_of(problem);
  const auto& d = problem.decomp();
  std::vector<Polynomial> P;
  double G_left = 0.0, P_left = 0.0;
  for (const Cell& c : cells) {
    const double a = d.A_on_piece(c.chi_piece, c.left);
    const Polynomial G = Polynomial::constant(G_left) + (-1.0 / a) * c.f_piece->antiderivative(c.left);
    const Polynomial Pi = Polynomial::constant(P_left) + G.antiderivative(c.left);
    G_left = G(c.right);
    P_left = Pi(c.right);
    P.push_back(Pi);
  }
  const double lo = problem.domain_lo();
  const double slope = -P_left / (problem.domain_hi() - lo);
  std::vector<Polynomial> pieces;
  for (const Polynomial& Pi : P) pieces.push_back(Polynomial({-slope * lo, slope}) + Pi);
  return SolutionFunction(PiecewiseFunction1D(problem.domain_lo(), problem.domain_hi(),
                                              interior(problem.knots()), std::move(pieces)),
                          EquationForm::modified);
}

// State (u, s): s = u' for the modified form, s = A u' (flux) for the original form.
// Both s are continuous across jumps, so the state is carried over knots unchanged.
struct Trajectory {
  std::vector<double> xs, u, s;
};

Trajectory integrate(const BVPProblem& problem, const std::vector<Cell>& cells, EquationForm form,
                     double s0, double source_scale, int steps) {
  const auto& d = problem.decomp();
  Trajectory tr;
  double u = 0.0, s = s0;
  tr.xs.push_back(problem.domain_lo());
  tr.u.push_back(u);
  tr.s.push_back(s);
  for (const Cell& c : cells) {
    auto rhs = [&](double x, double uu, double ss) -> std::array<double, 2> {
      (void)uu;
      const double a = d.A_on_piece(c.chi_piece, x);
      const double f = source_scale * (*c.f_piece)(x);
      if (form == EquationForm::modified)
        return {ss, (-f - d.dA_abs_on_piece(c.chi_piece, x) * ss) / a};
      return {ss / a, -f};
    };
    const double h = (c.right - c.left) / steps;
    for (int n = 0; n < steps; ++n) {
      const double x = c.left + n * h;
      const auto k1 = rhs(x, u, s);
      const auto k2 = rhs(x + 0.5 * h, u + 0.5 * h * k1[0], s + 0.5 * h * k1[1]);
      const auto k3 = rhs(x + 0.5 * h, u + 0.5 * h * k2[0], s + 0.5 * h * k2[1]);
      const auto k4 = rhs(x + h, u + h * k3[0], s + h * k3[1]);
      u += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
      s += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
      tr.xs.push_back(n + 1 == steps ? c.right : x + h);
      tr.u.push_back(u);
      tr.s.push_back(s);
    }
  }
  return tr;
}

SolutionFunction shooting(const BVPProblem& problem, EquationForm form, const SolverOptions& options) {
  if (options.rk_steps_per_interval < 2)
    throw ConfigError("solver.rk_steps_per_interval must be at least 2");
  const auto cells = cells_of(problem);
  const int steps = options.rk_steps_per_interval;
  const Trajectory particular = integrate(problem, cells, form, 0.0, 1.0, steps);
  const Trajectory homogeneous = integrate(problem, cells, form, 1.0, 0.0, steps);
  const double alpha = -particular.u.back() / homogeneous.u.back();

  const std::size_t n = particular.xs.size();
  std::vector<double> values(n), s(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = particular.u[i] + alpha * homogeneous.u[i];
    s[i] = particular.s[i] + alpha * homogeneous.s[i];
  }
  values.back() = 0.0;

  std::vector<double> left(n), right(n);
  const auto& d = problem.decomp();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int k = 0; k <= steps; ++k) {
      const std::size_t i = c * static_cast<std::size_t>(steps) + static_cast<std::size_t>(k);
      const double x = particular.xs[i];
      const double deriv =
          form == EquationForm::modified ? s[i] : s[i] / d.A_on_piece(cells[c].chi_piece, x);
      // node i is the right end of cell c for k == steps and the left end for k == 0
      if (k > 0) left[i] = deriv;
      if (k < steps) right[i] = deriv;
    }
  }
  left.front() = right.front();
  right.back() = left.back();
  return SolutionFunction(particular.xs, std::move(values), std::move(left), std::move(right), problem,
                          form);
}

}  // namespace

SolutionFunction solve_original(const BVPProblem& problem, const SolverOptions& options) {
  if (problem.decomp().piecewise_constant() && !options.force_ode) return closed_form_original(problem);
  return shooting(problem, EquationForm::original, options);
}

SolutionFunction solve_modified(const BVPProblem& problem, const SolverOptions& options) {
  if (problem.decomp().piecewise_constant() && !options.force_ode) return closed_form_modified(problem);
  return shooting(problem, EquationForm::modified, options);
}

DiracCombination rm_transform(const BVPProblem& problem, const SolverOptions& options) {
  const SolutionFunction modified = solve_modified(problem, options);
  DiracCombination g;
  for (const JumpRecord& j : jump_set(problem.decomp())) {
    const double a_k = j.oriented_jump() * problem.decomp().a_bar()(j.location);
    g.atoms.push_back({j.location, -a_k * modified.derivative(j.location)});
  }
  return g;
}

KernelVerdict kernel_membership(const BVPProblem& problem, double tol, const SolverOptions& options) {
  KernelVerdict v{true, tol, 0.0, rm_transform(problem, options)};
  for (const DiracAtom& a : v.per_jump.atoms) v.max_abs_weight = std::max(v.max_abs_weight, std::abs(a.weight));
  v.in_kernel = v.max_abs_weight <= tol;
  return v;
}

double h_minus_one_norm(const DiracCombination& g, double lo, double hi) {
  for (const DiracAtom& a : g.atoms) {
    if (!(a.location > lo && a.location < hi)) {
      std::ostringstream os;
      os << "Dirac atom at " << a.location << " is not interior to (" << lo << ", " << hi << ")";
      throw DomainError(os.str());
    }
  }
  // Green's function of -w'' + w with w(lo) = w(hi) = 0.
  const double denom = std::sinh(hi - lo);
  auto green = [&](double x, double y) {
    const double a = std::min(x, y), b = std::max(x, y);
    return std::sinh(a - lo) * std::sinh(hi - b) / denom;
  };
  double sq = 0.0;
  for (const DiracAtom& p : g.atoms)
    for (const DiracAtom& q : g.atoms) sq += p.weight * q.weight * green(p.location, q.location);
  return std::sqrt(std::max(sq, 0.0));
}

}  // namespace rmbias
