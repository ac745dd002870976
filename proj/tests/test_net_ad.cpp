#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <ostream>
#include <sstream>

#include "fixtures.hpp"
#include "rmbias/errors.hpp"
#include "rmbias/net_ad.hpp"
#include "rmbias/training.hpp"

namespace rmbias {

// gtest prints parameters in test names
void PrintTo(Architecture a, std::ostream* os) { *os << (a == Architecture::plain ? "plain" : "resnet"); }

namespace {

NetworkParams randomized(const std::vector<int>& widths, Architecture arch, std::uint64_t seed) {
  NetworkParams p = init_xavier(widths, arch, seed);
  std::mt19937_64 rng(seed + 17);
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& b : p.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = n(rng);
  return p;
}

TEST(Network, ParameterCount) {
  EXPECT_EQ(init_xavier({1, 2, 1}, Architecture::plain, 0).parameter_count(), 7u);
  EXPECT_EQ(init_xavier({1, 64, 64, 64, 1}, Architecture::plain, 0).parameter_count(),
            64u + 64 + 64 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
}

TEST(Network, SeedDeterminism) {
  const auto a = init_xavier({1, 64, 64, 64, 1}, Architecture::plain, 7);
  const auto b = init_xavier({1, 64, 64, 64, 1}, Architecture::plain, 7);
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_NE(a.flatten(), init_xavier({1, 64, 64, 64, 1}, Architecture::plain, 8).flatten());
}

TEST(Network, XavierVariance) {
  const auto p = init_xavier({1, 64, 64, 64, 1}, Architecture::plain, 7);
  for (std::size_t l = 1; l + 1 < p.layer_count(); ++l) {
    const Eigen::MatrixXd& W = p.weights[l];
    const double var = W.array().square().mean() - std::pow(W.mean(), 2);
    const double expected = 2.0 / (W.rows() + W.cols());
    EXPECT_NEAR(var / expected, 1.0, 0.15) << "layer " << l;
  }
  for (const auto& b : p.biases) EXPECT_TRUE(b.isZero());
}

TEST(Network, FlattenAssignRoundTripAndOrdering) {
  auto p = randomized({1, 3, 2, 1}, Architecture::plain, 1);
  const Eigen::VectorXd theta = p.flatten();
  // layer 0: W (3x1) row-major then b (3)
  EXPECT_EQ(theta[0], p.weights[0](0, 0));
  EXPECT_EQ(theta[3], p.biases[0][0]);
  // layer 1: W (2x3) row-major: second entry is (0,1)
  EXPECT_EQ(theta[7], p.weights[1](0, 1));
  Eigen::VectorXd shifted = theta.array() + 1.0;
  p.assign(std::span<const double>(shifted.data(), static_cast<std::size_t>(shifted.size())));
  EXPECT_EQ(p.flatten(), shifted);
  std::vector<double> wrong(3);
  EXPECT_THROW(p.assign(wrong), ConfigError);
}

TEST(Network, ValidateCatchesShapeMismatch) {
  auto p = init_xavier({1, 3, 1}, Architecture::plain, 0);
  p.weights[1] = Eigen::MatrixXd::Zero(2, 3);
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Jet, SingleTanh) {
  NetworkParams p = init_xavier({1, 1, 1}, Architecture::plain, 0);
  p.weights[0](0, 0) = 1.0;
  p.weights[1](0, 0) = 1.0;
  const Jet2 j0 = forward_jet(p, 0.0);
  EXPECT_EQ(j0.value, 0.0);
  EXPECT_EQ(j0.d1, 1.0);
  EXPECT_EQ(j0.d2, 0.0);
  const double x = 0.7, t = std::tanh(x);
  const Jet2 j = forward_jet(p, x);
  EXPECT_NEAR(j.value, t, 1e-15);
  EXPECT_NEAR(j.d1, 1 - t * t, 1e-15);
  EXPECT_NEAR(j.d2, -2 * t * (1 - t * t), 1e-15);
}

TEST(Jet, TwoLayerClosedForm) {
  // w(x) = c * tanh(a * tanh(b x + p) + q) + r, derivatives by hand
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  NetworkParams net = init_xavier({1, 1, 1, 1}, Architecture::plain, 0);
  const double b = u(rng), pb = u(rng), a = u(rng), q = u(rng), c = u(rng), r = u(rng);
  net.weights[0](0, 0) = b;
  net.biases[0][0] = pb;
  net.weights[1](0, 0) = a;
  net.biases[1][0] = q;
  net.weights[2](0, 0) = c;
  net.biases[2][0] = r;
  for (int k = 0; k < 10; ++k) {
    const double x = u(rng);
    const double t1 = std::tanh(b * x + pb), s1 = 1 - t1 * t1;
    const double g1 = b * s1, g2 = -2 * b * b * t1 * s1;  // first and second derivative of t1
    const double z = a * t1 + q, t2 = std::tanh(z), s2 = 1 - t2 * t2;
    const double z1 = a * g1, z2 = a * g2;
    const Jet2 j = forward_jet(net, x);
    EXPECT_NEAR(j.value, c * t2 + r, 1e-14);
    EXPECT_NEAR(j.d1, c * s2 * z1, 1e-14);
    EXPECT_NEAR(j.d2, c * (s2 * z2 - 2 * t2 * s2 * z1 * z1), 1e-14);
  }
}

class JetFiniteDifference : public ::testing::TestWithParam<Architecture> {};

TEST_P(JetFiniteDifference, MatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = randomized({1, 8, 8, 8, 1}, GetParam(), seed);
    const double x = 0.3;
    const Jet2 j = forward_jet(p, x);
    const double h1 = 1e-5, h2 = 1e-4;
    const double d1 = (forward_jet(p, x + h1).value - forward_jet(p, x - h1).value) / (2 * h1);
    const double d2 = (forward_jet(p, x + h2).value - 2 * j.value + forward_jet(p, x - h2).value) / (h2 * h2);
    EXPECT_LE(std::abs(j.d1 - d1) / std::abs(j.d1), 1e-6);
    EXPECT_LE(std::abs(j.d2 - d2) / std::abs(j.d2), 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(Architectures, JetFiniteDifference,
                         ::testing::Values(Architecture::plain, Architecture::resnet),
                         [](const auto& info) { return ::testing::PrintToString(info.param); });

TEST(Jet, BatchMatchesPointwise) {
  const auto p = randomized({1, 8, 8, 8, 1}, Architecture::resnet, 3);
  const std::vector<double> xs{-0.9, -0.1, 0.0, 0.4, 1.0};
  const JetBatch b = forward_batch(p, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Jet2 j = forward_jet(p, xs[i]);
    EXPECT_NEAR(b.value[static_cast<Eigen::Index>(i)], j.value, 1e-14);
    EXPECT_NEAR(b.d1[static_cast<Eigen::Index>(i)], j.d1, 1e-14);
    EXPECT_NEAR(b.d2[static_cast<Eigen::Index>(i)], j.d2, 1e-14);
  }
}

TEST(ResNet, ZeroSkipEqualsPlain) {
  auto res = randomized({1, 8, 8, 8, 8, 8, 1}, Architecture::resnet, 2);
  EXPECT_TRUE(res.has_skip_into(3));
  EXPECT_TRUE(res.has_skip_into(5));
  EXPECT_FALSE(res.has_skip_into(2));
  auto plain = res;
  plain.architecture = Architecture::plain;
  res.skip_scale = 0.0;
  for (double x : {-0.8, 0.0, 0.55}) {
    const Jet2 a = forward_jet(res, x), b = forward_jet(plain, x);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.d1, b.d1);
    EXPECT_EQ(a.d2, b.d2);
  }
  res.skip_scale = 1.0;
  EXPECT_NE(forward_jet(res, 0.55).value, forward_jet(plain, 0.55).value);
}

TEST(ResNet, SkipsOnlyBetweenEqualWidths) {
  const auto p = init_xavier({1, 8, 4, 8, 1}, Architecture::resnet, 0);
  EXPECT_TRUE(p.has_skip_into(3));
  const auto q = init_xavier({1, 8, 4, 6, 1}, Architecture::resnet, 0);
  EXPECT_FALSE(q.has_skip_into(3));
}

std::vector<LossTerm> failure_terms(const std::vector<double>& xs) {
  const auto p = testing::failure_problem();
  const SampleSet s{-1, 1, xs, {-1, 1}, 0, SampleMode::iid_uniform};
  return compile_risk(p, nullptr, s, RiskKind::rm, 1.0).terms();
}

Eigen::VectorXd finite_difference(const NetworkParams& p, const CompiledLoss& loss, double h) {
  Eigen::VectorXd theta = p.flatten(), g(theta.size());
  NetworkParams probe = p;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    probe.assign(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
    const double up = evaluate_loss(probe, loss, false).total;
    theta[i] = keep - h;
    probe.assign(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
    const double down = evaluate_loss(probe, loss, false).total;
    theta[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double max_rel_error(const Eigen::VectorXd& g, const Eigen::VectorXd& fd) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max({1.0, std::abs(g[i]), std::abs(fd[i])}));
  return worst;
}

TEST(Gradient, SmallNetThreeSamples) {
  const auto p = randomized({1, 2, 1}, Architecture::plain, 0);
  const std::vector<double> scales{1.0, 1.0};
  const auto terms = failure_terms({-0.4, 0.1, 0.6});
  const Eigen::VectorXd g = grad_params(p, terms, scales);
  EXPECT_LE(max_rel_error(g, finite_difference(p, CompiledLoss(terms, scales), 1e-6)), 1e-5);
}

TEST(Gradient, DeeperNetsBothArchitectures) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto arch : {Architecture::plain, Architecture::resnet})
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto p = randomized({1, 8, 8, 8, 1}, arch, seed);
      std::vector<double> xs(16);
      for (double& x : xs) x = u(rng);
      const CompiledLoss loss(failure_terms(xs), {1.0, 1.0});
      const Eigen::VectorXd g = evaluate_loss(p, loss, true).gradient;
      EXPECT_LE(max_rel_error(g, finite_difference(p, loss, 1e-6)), 1e-5);
    }
}

TEST(Gradient, ZeroResidualGivesZeroGradient) {
  const auto p = randomized({1, 4, 4, 1}, Architecture::plain, 1);
  std::vector<LossTerm> terms;
  for (double x : {-0.5, 0.2, 0.9}) {
    const Jet2 j = forward_jet(p, x);
    terms.push_back({x, 1.0, 0.5, 0.25, j.value + 0.5 * j.d1 + 0.25 * j.d2, 1.0, 0});
  }
  const Eigen::VectorXd g = grad_params(p, terms, {1.0});
  EXPECT_LE(g.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gradient, DuplicatedSampleDoublesContribution) {
  const auto p = randomized({1, 4, 4, 1}, Architecture::plain, 2);
  const LossTerm t{0.3, 0.0, 0.0, 1.0, 1.0, 1.0, 0};
  const Eigen::VectorXd once = grad_params(p, {t}, {1.0});
  const Eigen::VectorXd twice = grad_params(p, {t, t}, {1.0});
  EXPECT_LE((twice - 2.0 * once).cwiseAbs().maxCoeff(), 1e-13 * once.cwiseAbs().maxCoeff());
}

TEST(Gradient, ChannelScalesWeightChannels) {
  const auto p = randomized({1, 4, 1}, Architecture::plain, 3);
  const LossTerm a{0.3, 1.0, 0.0, 0.0, 1.0, 1.0, 0}, b{0.6, 0.0, 1.0, 0.0, -1.0, 1.0, 1};
  const auto e1 = evaluate_loss(p, CompiledLoss({a, b}, {1.0, 1.0}), false);
  const auto e3 = evaluate_loss(p, CompiledLoss({a, b}, {1.0, 3.0}), false);
  EXPECT_DOUBLE_EQ(e3.total - e1.total, 2.0 * e1.channels[1]);
  EXPECT_THROW(CompiledLoss({b}, {1.0}), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto p = randomized({1, 8, 8, 8, 1}, Architecture::resnet, 5);
  std::stringstream ss;
  save_checkpoint(p, ss);
  const NetworkParams q = load_checkpoint(ss);
  EXPECT_EQ(q.widths, p.widths);
  EXPECT_EQ(q.architecture, p.architecture);
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_EQ(q.flatten(), p.flatten());
}

TEST(Checkpoint, RejectsTamperedHeader) {
  std::stringstream bad(R"({"header":{"format":"rmbias-checkpoint","ordering_version":99}, "theta":[]})");
  EXPECT_THROW(load_checkpoint(bad), ConfigError);
}

}  // namespace
}  // namespace rmbias
