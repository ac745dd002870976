#include "rmbias/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <Eigen/Eigenvalues>

#include "rmbias/errors.hpp"

namespace rmbias {

QuadratureNodes gauss_legendre(int order) {
  if (order < 1) throw ConfigError("quadrature order must be at least 1");
  // Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the Legendre recurrence.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(std::max(order - 1, 0));
  for (int k = 1; k < order; ++k) sub[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  QuadratureNodes q;
  for (int i = 0; i < order; ++i) {
    q.x.push_back(es.eigenvalues()[i]);
    q.w.push_back(2.0 * std::pow(es.eigenvectors()(0, i), 2));
  }
  return q;
}

QuadratureNodes composite_nodes(const QuadratureRule& rule, const std::vector<double>& knots) {
  if (rule.cells_per_interval < 1) throw ConfigError("quadrature cells_per_interval must be at least 1");
  const QuadratureNodes ref = gauss_legendre(rule.order);
  QuadratureNodes q;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double h = (knots[i + 1] - knots[i]) / rule.cells_per_interval;
    for (int c = 0; c < rule.cells_per_interval; ++c) {
      const double a = knots[i] + c * h;
      for (std::size_t k = 0; k < ref.x.size(); ++k) {
        q.x.push_back(a + 0.5 * h * (ref.x[k] + 1.0));
        q.w.push_back(0.5 * h * ref.w[k]);
      }
    }
  }
  return q;
}

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::Linf: return "Linf";
    case NormKind::L2: return "L2";
    case NormKind::H1: return "H1";
  }
  return "?";
}

namespace {

Jet2 checked(const JetFunction& fn, double x) {
  const Jet2 j = fn(x);
  if (!std::isfinite(j.value) || !std::isfinite(j.d1)) {
    std::ostringstream os;
    os.precision(17);
    os << "non-finite function value at x = " << x;
    throw EvaluationError(os.str());
  }
  return j;
}

double linf_norm(const JetFunction& fn, const std::vector<double>& knots, int grid_points) {
  const double lo = knots.front(), hi = knots.back();
  std::vector<double> xs;
  xs.reserve(static_cast<std::size_t>(grid_points) + knots.size());
  for (int i = 0; i < grid_points; ++i)
    xs.push_back(i + 1 == grid_points ? hi : lo + (hi - lo) * i / std::max(grid_points - 1, 1));
  xs.insert(xs.end(), knots.begin(), knots.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  std::vector<double> vals(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) vals[i] = std::abs(checked(fn, xs[i]).value);
  double best = *std::max_element(vals.begin(), vals.end());

  // grid-local maxima, largest first
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool left_ok = i == 0 || vals[i] >= vals[i - 1];
    const bool right_ok = i + 1 == xs.size() || vals[i] >= vals[i + 1];
    if (left_ok && right_ok) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  constexpr std::size_t kRefined = 8;
  const int bits = std::numeric_limits<double>::digits / 2;
  for (std::size_t p = 0; p < std::min(kRefined, peaks.size()); ++p) {
    const std::size_t i = peaks[p];
    const double a = xs[i == 0 ? 0 : i - 1];
    const double b = xs[std::min(i + 1, xs.size() - 1)];
    if (!(a < b)) continue;
    auto neg_abs = [&](double x) { return -std::abs(checked(fn, x).value); };
    const auto r = boost::math::tools::brent_find_minima(neg_abs, a, b, bits);
    best = std::max(best, -r.second);
  }
  return best;
}

}  // namespace

double norm(const JetFunction& fn, NormKind which, const std::vector<double>& knots, const NormOptions& options) {
  if (knots.size() < 2) throw ConfigError("norm: need at least the two domain endpoints");
  if (which == NormKind::Linf) return linf_norm(fn, knots, options.linf_grid_points);
  const QuadratureNodes q = composite_nodes(options.rule, knots);
  double sum = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i) {
    const Jet2 j = checked(fn, q.x[i]);
    sum += q.w[i] * (j.value * j.value + (which == NormKind::H1 ? j.d1 * j.d1 : 0.0));
  }
  return std::sqrt(sum);
}

DeviationReport::DeviationReport(std::vector<std::string> names, std::vector<std::array<double, 3>> norms,
                                 std::vector<std::vector<std::array<double, 3>>> distances)
    : names_(std::move(names)), norms_(std::move(norms)), distances_(std::move(distances)) {}

bool DeviationReport::has(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t DeviationReport::index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ConfigError("deviation report has no function named \"" + name + "\"");
  return static_cast<std::size_t>(it - names_.begin());
}

double DeviationReport::norm_of(const std::string& name, NormKind k) const {
  return norms_[index(name)][static_cast<std::size_t>(k)];
}

double DeviationReport::distance(const std::string& a, const std::string& b, NormKind k) const {
  return distances_[index(a)][index(b)][static_cast<std::size_t>(k)];
}

double DeviationReport::relative(const std::string& a, const std::string& b, const std::string& normalizer,
                                 NormKind k) const {
  return distance(a, b, k) / norm_of(normalizer, k);
}

void DeviationReport::write_csv(std::ostream& os, const std::string& comment) const {
  const auto old = os.precision(17);
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "a,b,norm,distance,relative_to_a,relative_to_b\n";
  for (std::size_t i = 0; i < names_.size(); ++i)
    for (std::size_t j = i + 1; j < names_.size(); ++j)
      for (NormKind k : kAllNorms) {
        const double d = distances_[i][j][static_cast<std::size_t>(k)];
        os << names_[i] << ',' << names_[j] << ',' << to_string(k) << ',' << d << ','
           << d / norms_[i][static_cast<std::size_t>(k)] << ',' << d / norms_[j][static_cast<std::size_t>(k)] << '\n';
      }
  os.precision(old);
}

DeviationReport deviation_report(const std::vector<NamedFunction>& functions, const std::vector<double>& knots,
                                 const NormOptions& options) {
  if (functions.size() < 2) throw ConfigError("deviation report needs at least two functions");
  const std::size_t n = functions.size();
  std::vector<std::string> names;
  std::vector<std::array<double, 3>> norms(n);
  std::vector<std::vector<std::array<double, 3>>> dist(n, std::vector<std::array<double, 3>>(n, {0, 0, 0}));
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back(functions[i].name);
    for (NormKind k : kAllNorms) norms[i][static_cast<std::size_t>(k)] = norm(functions[i].fn, k, knots, options);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const JetFunction diff = difference(functions[i].fn, functions[j].fn);
      for (NormKind k : kAllNorms) {
        const double d = norm(diff, k, knots, options);
        dist[i][j][static_cast<std::size_t>(k)] = d;
        dist[j][i][static_cast<std::size_t>(k)] = d;
      }
    }
  return DeviationReport(std::move(names), std::move(norms), std::move(dist));
}

std::vector<Table1Row> table1_rows(const DeviationReport& r) {
  std::vector<Table1Row> rows;
  auto add = [&](const std::string& part, const std::string& label, const std::string& a, const std::string& b,
                 const std::string* normalizer) {
    Table1Row row{part, label, {}};
    for (NormKind k : kAllNorms)
      row.values[static_cast<std::size_t>(k)] = normalizer ? r.relative(a, b, *normalizer, k) : r.distance(a, b, k);
    rows.push_back(std::move(row));
  };
  if (r.has(kExact) && r.has(kModified)) {
    add("a", "||u-utilde||", kExact, kModified, nullptr);
    add("a", "||u-utilde||/||utilde||", kExact, kModified, &kModified);
    add("a", "||u-utilde||/||u||", kExact, kModified, &kExact);
  }
  if (r.has(kRmSolution) && r.has(kExact)) {
    add("b", "||u_theta-u||", kRmSolution, kExact, nullptr);
    add("b", "||u_theta-u||/||u||", kRmSolution, kExact, &kExact);
  }
  if (r.has(kRmSolution) && r.has(kModified)) {
    add("c", "||u_theta-utilde||", kRmSolution, kModified, nullptr);
    add("c", "||u_theta-utilde||/||utilde||", kRmSolution, kModified, &kModified);
  }
  if (r.has(kRmSolution) && r.has(kRmModifiedSolution)) {
    add("d", "||u_theta-utilde_theta||", kRmSolution, kRmModifiedSolution, nullptr);
    add("d", "||u_theta-utilde_theta||/||utilde_theta||", kRmSolution, kRmModifiedSolution, &kRmModifiedSolution);
    add("d", "||u_theta-utilde_theta||/||u_theta||", kRmSolution, kRmModifiedSolution, &kRmSolution);
  }
  return rows;
}

void write_table1_csv(const std::vector<Table1Row>& rows, std::ostream& os, const std::string& comment) {
  const auto old = os.precision(17);
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "part,quantity,Linf,L2,H1\n";
  for (const Table1Row& r : rows)
    os << r.part << ',' << r.quantity << ',' << r.values[0] << ',' << r.values[1] << ',' << r.values[2] << '\n';
  os.precision(old);
}

void write_table1_markdown(const std::vector<Table1Row>& rows, std::ostream& os) {
  const auto old_flags = os.flags();
  const auto old = os.precision(4);
  os << "| part | quantity | Y = Linf | Y = L2 | Y = H1 |\n";
  os << "|---|---|---|---|---|\n";
  std::string last_part;
  for (const Table1Row& r : rows) {
    os << "| " << (r.part == last_part ? "" : "(" + r.part + ")") << " | " << r.quantity << " | " << std::scientific
       << r.values[0] << " | " << r.values[1] << " | " << r.values[2] << " |\n";
    last_part = r.part;
  }
  os.flags(old_flags);
  os.precision(old);
}

double population_risk(const JetFunction& w, const BVPProblem& problem, double gamma, EquationForm kind,
                       const QuadratureRule& rule) {
  const QuadratureNodes q = composite_nodes(rule, problem.knots());
  const auto& d = problem.decomp();
  double sum = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i) {
    const double x = q.x[i];
    const Jet2 j = checked(w, x);
    const double dA = kind == EquationForm::original ? d.dA_classical(x) : d.dA_abs(x);
    const double r = d.A(x) * j.d2 + dA * j.d1 + problem.f().evaluate(x);
    sum += q.w[i] * r * r;
  }
  const double blo = w(problem.domain_lo()).value, bhi = w(problem.domain_hi()).value;
  return sum + gamma * (blo * blo + bhi * bhi);
}

}  // namespace rmbias
