#include "rmbias/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rmbias/errors.hpp"

namespace rmbias {

PiecewiseFunction1D::PiecewiseFunction1D(double lo, double hi, std::vector<double> breakpoints,
                                         std::vector<Polynomial> pieces)
    : lo_(lo), hi_(hi), breakpoints_(std::move(breakpoints)), pieces_(std::move(pieces)) {
  if (!(std::isfinite(lo_) && std::isfinite(hi_) && lo_ < hi_))
    throw ConfigError("piecewise function: domain must satisfy lo < hi");
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    const double b = breakpoints_[i];
    if (!(b > lo_ && b < hi_)) {
      std::ostringstream os;
      os << "breakpoints[" << i << "] = " << b << " is not strictly inside (" << lo_ << ", " << hi_ << ")";
      throw ConfigError(os.str());
    }
    if (i > 0 && !(b > breakpoints_[i - 1])) {
      std::ostringstream os;
      os << "breakpoints[" << i << "] must be strictly increasing";
      throw ConfigError(os.str());
    }
  }
  if (pieces_.size() != breakpoints_.size() + 1) {
    std::ostringstream os;
    os << "piecewise function: expected " << breakpoints_.size() + 1 << " pieces, got " << pieces_.size();
    throw ConfigError(os.str());
  }
}

PiecewiseFunction1D PiecewiseFunction1D::single(double lo, double hi, Polynomial p) {
  return PiecewiseFunction1D(lo, hi, {}, {std::move(p)});
}

PiecewiseFunction1D PiecewiseFunction1D::piecewise_constant(double lo, double hi,
                                                            std::vector<double> breakpoints,
                                                            const std::vector<double>& values) {
  std::vector<Polynomial> pieces;
  pieces.reserve(values.size());
  for (double v : values) pieces.push_back(Polynomial::constant(v));
  return PiecewiseFunction1D(lo, hi, std::move(breakpoints), std::move(pieces));
}

std::vector<double> PiecewiseFunction1D::knots() const {
  std::vector<double> k;
  k.reserve(breakpoints_.size() + 2);
  k.push_back(lo_);
  k.insert(k.end(), breakpoints_.begin(), breakpoints_.end());
  k.push_back(hi_);
  return k;
}

std::size_t PiecewiseFunction1D::piece_index(double x) const {
  if (!(x >= lo_ && x <= hi_)) {
    std::ostringstream os;
    os << "x = " << x << " outside [" << lo_ << ", " << hi_ << "]";
    throw DomainError(os.str());
  }
  // first breakpoint strictly greater than x
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
  return static_cast<std::size_t>(it - breakpoints_.begin());
}

double PiecewiseFunction1D::evaluate(double x, int derivative_order) const {
  if (derivative_order < 0 || derivative_order > 2)
    throw ConfigError("derivative_order must be 0, 1 or 2");
  return pieces_[piece_index(x)].derivative_at(x, derivative_order);
}

Jet2 PiecewiseFunction1D::jet(double x) const {
  const Polynomial& p = pieces_[piece_index(x)];
  const Polynomial d = p.derivative();
  return {p(x), d(x), d.derivative()(x)};
}

double PiecewiseFunction1D::left_limit(double x, int derivative_order) const {
  std::size_t i = piece_index(x);
  if (i > 0 && breakpoints_[i - 1] == x) --i;
  return pieces_[i].derivative_at(x, derivative_order);
}

bool PiecewiseFunction1D::all_pieces_constant() const {
  return std::all_of(pieces_.begin(), pieces_.end(), [](const Polynomial& p) { return p.is_constant(); });
}

CoefficientDecomposition::CoefficientDecomposition(PiecewiseFunction1D chi, Polynomial a_bar)
    : chi_(std::move(chi)), a_bar_(std::move(a_bar)) {
  if (!chi_.all_pieces_constant()) throw ConfigError("chi: every piece must be constant");

  chi_min_ = std::numeric_limits<double>::infinity();
  chi_max_ = -std::numeric_limits<double>::infinity();
  for (const Polynomial& p : chi_.pieces()) {
    chi_min_ = std::min(chi_min_, p(0.0));
    chi_max_ = std::max(chi_max_, p(0.0));
  }
  if (!(chi_min_ > 0.0)) throw EllipticityError("chi: values must be positive");

  // a_bar is probed densely on every piece, knots included.
  lambda_ = std::numeric_limits<double>::infinity();
  Lambda_ = -std::numeric_limits<double>::infinity();
  const std::vector<double> knots = chi_.knots();
  constexpr int kProbes = 512;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double c = chi_.pieces()[i](0.0);
    for (int s = 0; s <= kProbes; ++s) {
      const double x = knots[i] + (knots[i + 1] - knots[i]) * s / kProbes;
      const double a = c * a_bar_(x);
      lambda_ = std::min(lambda_, a);
      Lambda_ = std::max(Lambda_, a);
    }
  }
  if (!(lambda_ > 0.0) || !std::isfinite(Lambda_)) {
    std::ostringstream os;
    os << "A = chi * a_bar is not uniformly elliptic (min A = " << lambda_ << ")";
    throw EllipticityError(os.str());
  }
}

double CoefficientDecomposition::dA_classical(double x) const {
  return chi_.evaluate(x, 1) * a_bar_(x) + chi_.evaluate(x) * a_bar_.derivative_at(x, 1);
}

double CoefficientDecomposition::A_on_piece(std::size_t piece, double x) const {
  return chi_.pieces()[piece](x) * a_bar_(x);
}

double CoefficientDecomposition::dA_abs_on_piece(std::size_t piece, double x) const {
  return chi_.pieces()[piece](x) * a_bar_.derivative_at(x, 1);
}

std::vector<JumpRecord> jump_set(const CoefficientDecomposition& decomp) {
  const PiecewiseFunction1D& chi = decomp.chi();
  std::vector<JumpRecord> jumps;
  for (std::size_t i = 0; i < chi.breakpoints().size(); ++i) {
    const double left = chi.pieces()[i](0.0);
    const double right = chi.pieces()[i + 1](0.0);
    if (left != right) jumps.push_back({chi.breakpoints()[i], right, left, +1});
  }
  return jumps;
}

std::vector<double> mu_contributions(const std::vector<JumpRecord>& jumps, const Polynomial& a_bar,
                                     const ScalarFunction& phi_prime, std::optional<Interval> subset) {
  std::vector<double> out;
  out.reserve(jumps.size());
  for (const JumpRecord& j : jumps) {
    if (subset && !subset->contains(j.location)) continue;
    const double dphi = phi_prime(j.location);
    if (!std::isfinite(dphi)) {
      std::ostringstream os;
      os << "phi' is not finite at jump x = " << j.location;
      throw EvaluationError(os.str());
    }
    out.push_back(j.oriented_jump() * a_bar(j.location) * dphi);
  }
  return out;
}

double mu_functional(const std::vector<JumpRecord>& jumps, const Polynomial& a_bar,
                     const ScalarFunction& phi_prime, std::optional<Interval> subset) {
  double total = 0.0;
  for (double c : mu_contributions(jumps, a_bar, phi_prime, subset)) total += c;
  return total;
}

double mu_functional(const CoefficientDecomposition& decomp, const ScalarFunction& phi_prime,
                     std::optional<Interval> subset) {
  return mu_functional(jump_set(decomp), decomp.a_bar(), phi_prime, subset);
}

}  // namespace rmbias
