#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "apt/kernels.hpp"

using namespace apt;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Mean acceptance of the untempered random walk on N(0,1) with step sd s,
// by a tensor-product midpoint rule over (x, z).
double rwm_acceptance_by_grid(double s) {
  const int n = 1200;
  const double lim = 8.0, h = 2.0 * lim / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = -lim + (i + 0.5) * h;
    const double px = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    for (int j = 0; j < n; ++j) {
      const double z = -lim + (j + 0.5) * h;
      const double pz = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      const double y = x + s * z;
      total += px * pz * std::min(1.0, std::exp(-0.5 * (y * y - x * x)));
    }
  }
  return total * h * h;
}

}  // namespace

TEST(Acceptance, RwmAcceptanceValues) {
  EXPECT_EQ(rwm_acceptance(-1.0, 0.0, 0.5), 1.0);
  EXPECT_NEAR(rwm_acceptance(0.0, -2.0, 0.5), std::exp(-1.0), 1e-15);
  EXPECT_EQ(rwm_acceptance(0.0, kNegInf, 1.0), 0.0);
  EXPECT_EQ(rwm_acceptance(0.0, std::nan(""), 1.0), 0.0);
  EXPECT_EQ(rwm_acceptance(kNegInf, -5.0, 1.0), 1.0);
  EXPECT_EQ(rwm_acceptance(0.0, -1e308, 1.0), 0.0);
}

TEST(Acceptance, SwapAcceptanceValues) {
  EXPECT_EQ(swap_acceptance(-3.0, -1.0, 1.0, 0.5), 1.0);
  EXPECT_NEAR(swap_acceptance(-1.0, -3.0, 1.0, 0.5), std::exp(-1.0), 1e-15);
  EXPECT_EQ(swap_acceptance(-2.0, -2.0, 1.0, 0.1), 1.0);
  EXPECT_EQ(swap_acceptance(kNegInf, kNegInf, 1.0, 0.1), 1.0);
  EXPECT_EQ(swap_acceptance(-1.0, kNegInf, 1.0, 0.1), 0.0);
  EXPECT_EQ(swap_acceptance(kNegInf, -1.0, 1.0, 0.1), 1.0);
  EXPECT_EQ(swap_acceptance(0.0, -1e308, 1.0, 0.0), 0.0);
  EXPECT_EQ(swap_acceptance(0.0, -1e308, 0.5, 0.5), 1.0);
}

TEST(SwapStep, FlatTargetAlwaysSwapsAndPairIsUniform) {
  ChainState<ContinuousState> chain;
  for (int l = 0; l < 4; ++l) {
    chain.states.push_back(Eigen::VectorXd::Constant(1, l));
    chain.log_pi.push_back(0.0);
  }
  const auto ladder = beta_from_rho(RhoVector({0.0, 0.0, 0.0}));
  std::array<int, 3> counts{};
  for (std::uint64_t n = 0; n < 30000; ++n) {
    StreamRng rng(7, n, kSwapSlot);
    const auto before = chain;
    const auto out = swap_step(chain, ladder, rng);
    EXPECT_EQ(out.acceptance_prob, 1.0);
    ASSERT_TRUE(out.accepted);
    ++counts[out.pair];
    for (std::size_t l = 0; l < 4; ++l) {
      if (l == out.pair) EXPECT_EQ(chain.states[l], before.states[l + 1]);
      else if (l == out.pair + 1) EXPECT_EQ(chain.states[l], before.states[l - 1]);
      else EXPECT_EQ(chain.states[l], before.states[l]);
    }
  }
  for (int c : counts) EXPECT_NEAR(c / 30000.0, 1.0 / 3.0, 0.015);
}

TEST(SwapStep, RejectedSwapLeavesChainAlone) {
  ChainState<ContinuousState> chain;
  chain.states = {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)};
  chain.log_pi = {0.0, -1e6};
  const auto ladder = beta_from_rho(RhoVector({0.0}));
  StreamRng rng(1, 0, kSwapSlot);
  const auto out = swap_step(chain, ladder, rng);
  EXPECT_EQ(out.pair, 0u);
  EXPECT_FALSE(out.accepted);
  EXPECT_EQ(chain.states[0][0], 0.0);
  EXPECT_EQ(chain.log_pi[1], -1e6);
}

TEST(ProposalShape, CovarianceIncludesScale) {
  Eigen::Matrix2d g;
  g << 2.0, 0.5, 0.5, 1.0;
  const auto shape = ProposalShape::from_covariance(g, std::log(3.0));
  EXPECT_LT((shape.covariance() - 3.0 * g).norm(), 1e-12);
  EXPECT_THROW(ProposalShape::from_covariance(-g), RuntimeError);
}

TEST(ProposalShape, IncrementDensityMatchesClosedForm) {
  const auto shape = ProposalShape::from_covariance(Eigen::Matrix2d::Identity() * 4.0);
  const Eigen::Vector2d z(1.0, -2.0);
  const double expected = -std::log(2.0 * std::numbers::pi * 4.0) - 0.5 * z.squaredNorm() / 4.0;
  EXPECT_NEAR(shape.log_increment_density(z), expected, 1e-12);
}

TEST(RwmStep, StandardNormalAcceptanceMatchesOracles) {
  const double s = 2.38;
  const double closed_form = 2.0 / std::numbers::pi * std::atan(2.0 / s);
  const double grid = rwm_acceptance_by_grid(s);
  EXPECT_NEAR(closed_form, 0.44491, 1e-5);
  EXPECT_NEAR(grid, closed_form, 1e-4);

  GaussianMixture target(standard_normal_spec(1));
  const auto shape = ProposalShape::from_covariance(Eigen::MatrixXd::Constant(1, 1, s * s));
  ContinuousState x = Eigen::VectorXd::Zero(1);
  double log_pi = target.log_density(x);
  double accepted = 0.0;
  const std::size_t n = 200000;
  for (std::size_t i = 0; i < n; ++i) {
    StreamRng rng(99, i, 0);
    const auto out = rwm_step(x, log_pi, target, shape, 1.0, rng);
    EXPECT_EQ(out.proposal, x + out.increment);
    accepted += out.accepted;
    x = out.new_state;
    log_pi = out.new_log_pi;
  }
  EXPECT_NEAR(accepted / n, grid, 0.01);
}

TEST(RwmStep, TemperedStepTargetsFlattenedDensity) {
  // At beta = 0.25 the invariant law of an N(0,1) target is N(0, 4).
  GaussianMixture target(standard_normal_spec(1));
  const auto shape = ProposalShape::from_covariance(Eigen::MatrixXd::Constant(1, 1, 16.0));
  ContinuousState x = Eigen::VectorXd::Zero(1);
  double log_pi = target.log_density(x);
  double sum2 = 0.0;
  const std::size_t n = 200000;
  for (std::size_t i = 0; i < n; ++i) {
    StreamRng rng(5, i, 0);
    const auto out = rwm_step(x, log_pi, target, shape, 0.25, rng);
    x = out.new_state;
    log_pi = out.new_log_pi;
    sum2 += x[0] * x[0];
  }
  EXPECT_NEAR(sum2 / n, 4.0, 0.25);
}

TEST(RwmStep, DimensionMismatchThrows) {
  GaussianMixture target(standard_normal_spec(2));
  const auto shape = ProposalShape::identity(3);
  StreamRng rng(1, 0, 0);
  EXPECT_THROW(rwm_step(Eigen::VectorXd::Zero(2), 0.0, target, shape, 1.0, rng), ConfigError);
}

TEST(FlipStep, CachedDensityStaysExact) {
  IsingPosterior target(IsingPosteriorSpec{synthetic_image(20), 1.0, 0.7});
  IsingState state = target.make_state(BinaryImage(20, 20, 0));
  double log_pi = target.log_density(state);
  std::size_t accepted = 0;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    StreamRng rng(3, i, 0);
    const auto out = flip_step(state, log_pi, target, 0.5, rng);
    accepted += out.accepted;
    EXPECT_EQ(log_pi, out.new_log_pi);
    if (i % 97 == 0) EXPECT_EQ(log_pi, target.log_density(state.image()));
  }
  EXPECT_EQ(log_pi, target.log_density(state.image()));
  EXPECT_GT(accepted, 0u);
}

TEST(FlipStep, PlugInAcceptanceProbabilities) {
  // 2x2 all-agree state: any flip loses one match and three agreements.
  IsingPosterior target(IsingPosteriorSpec{BinaryImage(2, 2, 1), 1.0, 0.7});
  EXPECT_NEAR(target.log_density(target.make_state(BinaryImage(2, 2, 1))), 4.0 + 6.0 * 0.7, 1e-15);
  for (std::uint64_t i = 0; i < 20; ++i) {
    IsingState state = target.make_state(BinaryImage(2, 2, 1));
    double log_pi = target.log_density(state);
    StreamRng rng(1, i, 0);
    EXPECT_NEAR(flip_step(state, log_pi, target, 1.0, rng).acceptance_prob, std::exp(-3.1), 1e-15);
    IsingState cold = target.make_state(BinaryImage(2, 2, 1));
    double cold_log_pi = target.log_density(cold);
    StreamRng rng2(1, i, 0);
    EXPECT_GT(flip_step(cold, cold_log_pi, target, 1e-12, rng2).acceptance_prob, 1.0 - 1e-11);
  }
  IsingPosterior flat(IsingPosteriorSpec{BinaryImage(3, 3, 0), 0.0, 0.0});
  IsingState state = flat.make_state(BinaryImage(3, 3, 0));
  double log_pi = flat.log_density(state);
  for (std::uint64_t i = 0; i < 50; ++i) {
    StreamRng rng(2, i, 0);
    const auto out = flip_step(state, log_pi, flat, 1.0, rng);
    EXPECT_EQ(out.acceptance_prob, 1.0);
    EXPECT_TRUE(out.accepted);
  }
}
