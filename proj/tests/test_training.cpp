#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "rmbias/analysis.hpp"
#include "rmbias/errors.hpp"
#include "rmbias/training.hpp"

namespace rmbias {
namespace {

using namespace rmbias::testing;

std::vector<double> interior_breakpoints(const BVPProblem& p) {
  return {p.knots().begin() + 1, p.knots().end() - 1};
}

JetFunction closed_form(double (*v)(double), double (*d)(double), double d2_left, double d2_right) {
  return [=](double x) { return Jet2{v(x), d(x), x < 0 ? d2_left : d2_right}; };
}

TEST(Sampler, FixedGridMidpoints) {
  const auto s = draw_samples(-1, 1, 4, SampleMode::fixed_grid, 0, {});
  ASSERT_EQ(s.interior.size(), 4u);
  const std::vector<double> expected{-0.6, -0.2, 0.2, 0.6};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.interior[i], expected[i], 1e-15);
  EXPECT_EQ(s.boundary[0], -1.0);
  EXPECT_EQ(s.boundary[1], 1.0);
}

TEST(Sampler, ExactBreakpointCollisionIsShifted) {
  const auto s = draw_samples(-1, 1, 4, SampleMode::fixed_grid, 0, {-0.2 + 0.0});
  const auto grid = draw_samples(-1, 1, 4, SampleMode::fixed_grid, 0, {});
  // -0.2 is only hit if the midpoint arithmetic produces it exactly; either way no sample equals it
  for (double x : s.interior) EXPECT_NE(x, -0.2);
  if (grid.interior[1] == -0.2) EXPECT_EQ(s.interior[1], -0.2 + kBreakpointShift);
}

TEST(Sampler, SeedDeterminism) {
  const auto a = draw_samples(-1, 1, 1000, SampleMode::iid_uniform, 42, {0.0});
  const auto b = draw_samples(-1, 1, 1000, SampleMode::iid_uniform, 42, {0.0});
  EXPECT_EQ(a.interior, b.interior);
  EXPECT_NE(a.interior, draw_samples(-1, 1, 1000, SampleMode::iid_uniform, 43, {0.0}).interior);
  for (double x : a.interior) {
    EXPECT_GT(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(Sampler, BreakpointsHaveMeasureZero) {
  // 10^6 uniform draws on (-1, 1): a window of half-width 1e-6 around 0 has probability 1e-6,
  // so the expected count is 1. No draw may hit the breakpoint itself.
  const auto s = draw_samples(-1, 1, 1'000'000, SampleMode::iid_uniform, 2024, {0.0});
  const auto exact = std::count(s.interior.begin(), s.interior.end(), 0.0);
  const auto near = std::count_if(s.interior.begin(), s.interior.end(), [](double x) { return std::abs(x) < 1e-6; });
  EXPECT_EQ(exact, 0);
  EXPECT_LE(near, 8);  // P(Poisson(1) > 8) < 1e-5
}

TEST(Risk, ExactModifiedSolutionHasZeroRisk) {
  const auto p = failure_problem();
  const auto s = draw_samples(-1, 1, 1000, SampleMode::iid_uniform, 1, interior_breakpoints(p));
  const auto ut = closed_form(ut_exact, dut_exact, 0.0, 2.0);
  for (RiskKind k : {RiskKind::rm, RiskKind::effective}) {
    const RiskValues r = empirical_risk(ut, p, s, k, 1.0);
    EXPECT_LE(r.interior, 1e-20);
    EXPECT_EQ(r.boundary, 0.0);
  }
}

TEST(Risk, OriginalSolutionAlsoHasZeroEmpiricalRisk) {
  // u solves the equation pointwise off the jump, so no sample can detect the flux condition.
  const auto p = failure_problem();
  const auto s = draw_samples(-1, 1, 1000, SampleMode::iid_uniform, 1, interior_breakpoints(p));
  const auto u = closed_form(u_exact, du_exact, 0.0, 2.0);
  EXPECT_LE(empirical_risk(u, p, s, RiskKind::effective, 1.0).interior, 1e-20);
}

TEST(Risk, ZeroNetworkFourPoints) {
  const auto p = failure_problem();
  const SampleSet s{-1, 1, {-0.5, -0.25, 0.25, 0.5}, {-1, 1}, 0, SampleMode::fixed_grid};
  const JetFunction zero = [](double) { return Jet2{0, 0, 0}; };
  const RiskValues r = empirical_risk(zero, p, s, RiskKind::rm, 1.0);
  EXPECT_DOUBLE_EQ(r.total, 4.0);
  EXPECT_EQ(r.boundary, 0.0);
}

TEST(Risk, BoundaryTermUsesGamma) {
  const auto p = failure_problem();
  const SampleSet s{-1, 1, {0.5}, {-1, 1}, 0, SampleMode::fixed_grid};
  const JetFunction one = [](double) { return Jet2{1, 0, 0}; };
  const RiskValues r1 = empirical_risk(one, p, s, RiskKind::rm, 1.0);
  const RiskValues r3 = empirical_risk(one, p, s, RiskKind::rm, 3.0);
  EXPECT_DOUBLE_EQ(r1.boundary, 2.0);
  EXPECT_DOUBLE_EQ(r3.total - r1.total, 4.0);
}

TEST(Risk, IdentityOnEverySampledSet) {
  std::vector<BVPProblem> problems{failure_problem(), invariant_problem()};
  problems.emplace_back(
      CoefficientDecomposition(PiecewiseFunction1D::piecewise_constant(-1, 1, {-0.3, 0.5}, {2, 0.5, 1}),
                               Polynomial{1.5, 0.4, -0.2}),
      PiecewiseFunction1D(-1, 1, {0.1}, {Polynomial{1.0, 2.0}, Polynomial{-1.0, 0.0, 3.0}}));
  const auto net = as_function(init_xavier({1, 8, 8, 1}, Architecture::plain, 3));
  for (const auto& p : problems)
    for (SampleMode m : {SampleMode::iid_uniform, SampleMode::fixed_grid})
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = draw_samples(-1, 1, 257, m, seed, interior_breakpoints(p));
        const RiskValues a = empirical_risk(net, p, s, RiskKind::rm, 1.0);
        const RiskValues b = empirical_risk(net, p, s, RiskKind::effective, 1.0);
        EXPECT_EQ(a.total, b.total);
        EXPECT_EQ(a.interior, b.interior);
      }
}

TEST(Risk, CompiledLossMatchesDirectEvaluation) {
  const auto p = failure_problem();
  const auto params = init_xavier({1, 8, 8, 1}, Architecture::plain, 4);
  const auto s = draw_samples(-1, 1, 100, SampleMode::iid_uniform, 5, interior_breakpoints(p));
  const SolutionFunction u = solve_original(p);
  const auto direct = empirical_risk(as_function(params), p, s, RiskKind::rm, 2.0);
  const auto compiled = evaluate_loss(params, compile_risk(p, nullptr, s, RiskKind::rm, 2.0), false);
  EXPECT_NEAR(compiled.total, direct.total, 1e-12 * direct.total);
  const auto sv = supervised_risk(as_function(params), u, s, 2.0);
  const auto csv = evaluate_loss(params, compile_risk(p, &u, s, RiskKind::supervised, 2.0), false);
  EXPECT_NEAR(csv.total, sv.total, 1e-12 * sv.total);
  EXPECT_THROW(compile_risk(p, nullptr, s, RiskKind::supervised, 1.0), ConfigError);
}

TEST(SupervisedRisk, ZeroAtTargetAndQuadratureLimit) {
  const auto p = failure_problem();
  const SolutionFunction u = solve_original(p);
  const auto s = draw_samples(-1, 1, 100000, SampleMode::fixed_grid, 0, interior_breakpoints(p));
  EXPECT_EQ(supervised_risk(u.as_function(), u, s, 1.0).total, 0.0);
  const JetFunction zero = [](double) { return Jet2{0, 0, 0}; };
  const double h1sq = std::pow(norm(u.as_function(), NormKind::H1, p.knots()), 2);
  const RiskValues r = supervised_risk(zero, u, s, 1.0);
  // interior nodes drop the endpoint weights, so the grid mean is only O(1/n) accurate
  EXPECT_NEAR(r.total, h1sq, 5e-5 * h1sq);
  // u vanishes on the boundary, so the boundary weight is irrelevant
  EXPECT_EQ(supervised_risk(zero, u, s, 2.0).total, r.total);
}

TEST(Risk, PopulationConsistency) {
  const auto p = failure_problem();
  const JetFunction w = [](double x) {
    const double s = std::sin(2 * x), c = std::cos(2 * x), q = 1 - x * x;
    return Jet2{s * q, 2 * c * q - 2 * x * s, -4 * s * q - 8 * x * c - 2 * s};
  };
  const auto s = draw_samples(-1, 1, 10000, SampleMode::fixed_grid, 0, interior_breakpoints(p));
  const double empirical = empirical_risk(w, p, s, RiskKind::effective, 0.0).interior;
  const double population = population_risk(w, p, 0.0, EquationForm::modified);
  EXPECT_NEAR(empirical / population, 1.0, 0.02);
}

TrainConfig small_config(std::size_t steps) {
  TrainConfig c;
  c.n_int = 64;
  c.steps = steps;
  c.seed = 3;
  return c;
}

TEST(Train, ZeroLearningRateGdLeavesParametersUnchanged) {
  const auto p = failure_problem();
  const auto init = init_xavier({1, 8, 8, 1}, Architecture::plain, 1);
  TrainConfig c = small_config(20);
  c.optimizer = GdConfig{0.0};
  const RunRecord r = train(init, p, nullptr, c);
  EXPECT_EQ(r.final_params.flatten(), init.flatten());
  ASSERT_EQ(r.risks.size(), 21u);
  for (const auto& rec : r.risks) EXPECT_EQ(rec.total, r.risks.front().total);
}

TEST(Train, ZeroStepsRecordsInitialRisk) {
  const auto init = init_xavier({1, 4, 1}, Architecture::plain, 1);
  const RunRecord r = train(init, failure_problem(), nullptr, small_config(0));
  EXPECT_EQ(r.risks.size(), 1u);
  EXPECT_EQ(r.final_params.flatten(), init.flatten());
}

TEST(Train, IdenticalSeedsGiveIdenticalRuns) {
  const auto p = failure_problem();
  const auto init = init_xavier({1, 8, 8, 1}, Architecture::plain, 1);
  TrainConfig c = small_config(50);
  c.resample_every = 10;
  const RunRecord a = train(init, p, nullptr, c);
  const RunRecord b = train(init, p, nullptr, c);
  ASSERT_EQ(a.risks.size(), b.risks.size());
  for (std::size_t i = 0; i < a.risks.size(); ++i) EXPECT_EQ(a.risks[i].total, b.risks[i].total);
  EXPECT_EQ(a.final_params.flatten(), b.final_params.flatten());
}

TEST(Train, AdamDecreasesRisk) {
  const auto p = failure_problem();
  const auto init = init_xavier({1, 16, 16, 1}, Architecture::plain, 1);
  TrainConfig c = small_config(1000);
  c.optimizer = AdamConfig{1e-2};
  const RunRecord r = train(init, p, nullptr, c);
  std::vector<double> head, tail;
  for (std::size_t i = 0; i < 100; ++i) head.push_back(r.risks[i].total);
  for (std::size_t i = r.risks.size() - 100; i < r.risks.size(); ++i) tail.push_back(r.risks[i].total);
  std::nth_element(head.begin(), head.begin() + 50, head.end());
  std::nth_element(tail.begin(), tail.begin() + 50, tail.end());
  EXPECT_LT(tail[50], head[50]);
}

TEST(Train, LearningRateDecayIsValidated) {
  NetworkParams init = init_xavier({1, 1, 1}, Architecture::plain, 0);
  init.weights[0](0, 0) = 0.0;
  init.weights[1](0, 0) = 0.0;
  const BVPProblem p(failure_decomp(), PiecewiseFunction1D::piecewise_constant(-1, 1, {}, {0.0}));
  TrainConfig c = small_config(2);
  c.optimizer = AdamConfig{1e-2, 0.9, 0.999, 1e-8, 1e-4};
  EXPECT_NO_THROW(train(init, p, nullptr, c));
  c.optimizer = AdamConfig{1e-2, 0.9, 0.999, 1e-8, -1.0};
  EXPECT_THROW(train(init, p, nullptr, c), ConfigError);
}

TEST(Train, DivergenceAbortsWithStep) {
  const auto p = failure_problem();
  const auto init = init_xavier({1, 8, 1}, Architecture::plain, 1);
  TrainConfig c = small_config(50);
  c.optimizer = GdConfig{1e200};
  try {
    train(init, p, nullptr, c);
    FAIL() << "expected NumericalAbort";
  } catch (const NumericalAbort& e) {
    EXPECT_GE(e.step(), 1u);
    EXPECT_LE(e.step(), 50u);
  }
}

TEST(Train, ConfigValidation) {
  TrainConfig c;
  c.optimizer = AdamConfig{0.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.optimizer = GdConfig{-1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.optimizer = GdConfig{0.0};
  EXPECT_NO_THROW(c.validate());
  c.n_int = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace rmbias
