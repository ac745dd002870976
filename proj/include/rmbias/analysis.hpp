#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "rmbias/exact_solve.hpp"
#include "rmbias/jet.hpp"

namespace rmbias {

/// Composite Gauss-Legendre rule: `cells_per_interval` equal cells between consecutive
/// knots, `order` nodes per cell. Exact for degree <= 2*order-1 on every cell.
struct QuadratureRule {
  int order = 16;
  int cells_per_interval = 64;
};

struct QuadratureNodes {
  std::vector<double> x;
  std::vector<double> w;
};

/// Nodes and weights on [-1, 1].
QuadratureNodes gauss_legendre(int order);

/// Composite nodes over [knots.front(), knots.back()]. No node coincides with a knot.
QuadratureNodes composite_nodes(const QuadratureRule& rule, const std::vector<double>& knots);

enum class NormKind { Linf, L2, H1 };

inline constexpr std::array<NormKind, 3> kAllNorms{NormKind::Linf, NormKind::L2, NormKind::H1};

std::string to_string(NormKind k);

struct NormOptions {
  QuadratureRule rule;
  /// L-infinity probes: this many equispaced points plus every knot, followed by a
  /// local Brent refinement around the largest grid maxima.
  int linf_grid_points = 10000;
};

/// ||fn|| over [knots.front(), knots.back()]; H1 uses ||w||_L2^2 + ||w'||_L2^2.
double norm(const JetFunction& fn, NormKind which, const std::vector<double>& knots, const NormOptions& options = {});

struct NamedFunction {
  std::string name;
  JetFunction fn;
};

/// Pairwise distances and norms among named functions in L-infinity, L2 and H1.
class DeviationReport {
 public:
  DeviationReport(std::vector<std::string> names, std::vector<std::array<double, 3>> norms,
                  std::vector<std::vector<std::array<double, 3>>> distances);

  const std::vector<std::string>& names() const { return names_; }
  bool has(const std::string& name) const;

  double norm_of(const std::string& name, NormKind k) const;
  double distance(const std::string& a, const std::string& b, NormKind k) const;
  /// distance(a, b) / norm_of(normalizer)
  double relative(const std::string& a, const std::string& b, const std::string& normalizer, NormKind k) const;

  /// Long format: a,b,norm,distance,relative_to_a,relative_to_b
  void write_csv(std::ostream& os, const std::string& comment = {}) const;

 private:
  std::size_t index(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<std::array<double, 3>> norms_;
  std::vector<std::vector<std::array<double, 3>>> distances_;
};

DeviationReport deviation_report(const std::vector<NamedFunction>& functions, const std::vector<double>& knots,
                                 const NormOptions& options = {});

/// Canonical names used by the deviation table.
inline const std::string kExact = "u";
inline const std::string kModified = "utilde";
inline const std::string kRmSolution = "u_theta";
inline const std::string kRmModifiedSolution = "utilde_theta";

/// One row of the deviation table: values in L-infinity, L2, H1 order.
struct Table1Row {
  std::string part;
  std::string quantity;
  std::array<double, 3> values;
};

/// Parts (a)-(d), each included only when its functions are present in the report.
std::vector<Table1Row> table1_rows(const DeviationReport& report);
void write_table1_csv(const std::vector<Table1Row>& rows, std::ostream& os, const std::string& comment = {});
void write_table1_markdown(const std::vector<Table1Row>& rows, std::ostream& os);

/// int (residual)^2 dx + gamma (w(lo)^2 + w(hi)^2) by composite quadrature over the problem knots.
/// original: residual = (A w')' + f off the jumps; modified: A w'' + (D^a A) w' + f.
double population_risk(const JetFunction& w, const BVPProblem& problem, double gamma, EquationForm kind,
                       const QuadratureRule& rule = {});

}  // namespace rmbias
