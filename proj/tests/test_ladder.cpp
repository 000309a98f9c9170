#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "apt/ladder.hpp"

using namespace apt;

TEST(BetaFromRho, ZeroRhoGivesPowersOfOneOverE) {
  const auto ladder = beta_from_rho(RhoVector({0.0, 0.0, 0.0, 0.0}));
  ASSERT_EQ(ladder.size(), 5u);
  EXPECT_EQ(ladder.beta(0), 1.0);
  for (std::size_t l = 1; l < 5; ++l) EXPECT_NEAR(ladder.beta(l), std::exp(-static_cast<double>(l)), 1e-15);
}

TEST(BetaFromRho, LogLogTwoGivesOneHalf) {
  const RhoVector rho({std::log(std::log(2.0))});
  const auto ladder = beta_from_rho(rho);
  EXPECT_NEAR(ladder.beta(1), 0.5, 1e-15);
  EXPECT_NEAR(delta_beta(rho, 1), 0.5, 1e-15);
}

TEST(BetaFromRho, StrictlyDecreasingForWideRandomRho) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> r(7);
    for (auto& v : r) v = u(rng);
    const auto ladder = beta_from_rho(RhoVector(r));
    EXPECT_EQ(ladder.beta(0), 1.0);
    // With rho near 10 the betas underflow to 0; log betas stay ordered.
    for (std::size_t l = 0; l + 1 < ladder.size(); ++l) {
      EXPECT_LT(ladder.log_beta(l + 1), ladder.log_beta(l));
      EXPECT_GE(ladder.delta(l), 0.0);
      EXPECT_LE(ladder.beta(l + 1), ladder.beta(l));
    }
    EXPECT_GE(ladder.beta(ladder.size() - 1), 0.0);
  }
}

TEST(BetaFromRho, SmallestRhoKeepsPositiveGaps) {
  const RhoVector rho(std::vector<double>(5, -10.0));
  for (std::size_t l = 1; l <= 5; ++l) EXPECT_GT(delta_beta(rho, l), 0.0);
}

TEST(BetaFromRho, MonotoneInEachComponent) {
  const std::vector<double> base{0.3, -0.2, 1.1, 0.4};
  const auto before = beta_from_rho(RhoVector(base));
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto bumped = base;
    bumped[i] += 0.5;
    const auto after = beta_from_rho(RhoVector(bumped));
    for (std::size_t k = 0; k <= i; ++k) EXPECT_EQ(after.beta(k), before.beta(k));
    for (std::size_t k = i + 1; k < after.size(); ++k) EXPECT_LT(after.beta(k), before.beta(k));
  }
}

TEST(DeltaBeta, MatchesLadderDifferences) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> r(6);
    for (auto& v : r) v = u(rng);
    const RhoVector rho(r);
    const auto ladder = beta_from_rho(rho);
    for (std::size_t l = 1; l <= r.size(); ++l) {
      const double diff = ladder.beta(l - 1) - ladder.beta(l);
      EXPECT_NEAR(delta_beta(rho, l), diff, 1e-15 + 1e-13 * diff);
    }
  }
}

TEST(DeltaBeta, LevelOutOfRangeThrows) {
  const RhoVector rho({0.0, 0.0});
  EXPECT_THROW(delta_beta(rho, 0), std::out_of_range);
  EXPECT_THROW(delta_beta(rho, 3), std::out_of_range);
}

TEST(RhoFromBetas, RoundTrip) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-4.0, 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> r(5);
    for (auto& v : r) v = u(rng);
    const auto ladder = beta_from_rho(RhoVector(r));
    const auto back = rho_from_betas(ladder.betas());
    ASSERT_EQ(back.size(), r.size());
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(back[i], r[i], 1e-10);
  }
}

TEST(ProjectRho, ClampsToBounds) {
  const auto rho = project_rho({0.5, 11.0, -12.0}, RhoBounds{-10.0, 10.0});
  EXPECT_EQ(rho[0], 0.5);
  EXPECT_EQ(rho[1], 10.0);
  EXPECT_EQ(rho[2], -10.0);
}

TEST(RhoVector, UpdatesStayInsideBounds) {
  RhoVector rho({0.0, 0.0}, RhoBounds{-1.0, 2.0});
  rho.set(0, 5.0);
  rho.set(1, -5.0);
  EXPECT_EQ(rho[0], 2.0);
  EXPECT_EQ(rho[1], -1.0);
  EXPECT_THROW(rho.set(0, std::nan("")), RuntimeError);
  EXPECT_THROW(RhoVector({0.0}, RhoBounds{1.0, 1.0}), ConfigError);
}
