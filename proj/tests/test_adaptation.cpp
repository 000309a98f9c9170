#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "apt/adaptation.hpp"

using namespace apt;

namespace {

Eigen::MatrixXd random_spd(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = n(rng);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

Eigen::VectorXd random_vector(Eigen::Index d, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(rng);
  return v;
}

AdaptSettings settings(AdaptMode mode, double eps = 1e-6) {
  AdaptSettings s;
  s.mode = mode;
  s.eps_clamp = eps;
  return s;
}

}  // namespace

TEST(StepSizes, PolynomialDecay) {
  StepSizeSchedule s;
  EXPECT_DOUBLE_EQ(s(0, 1), 1.0);
  EXPECT_NEAR(s(1, 1), 0.65975, 1e-5);
  EXPECT_NEAR(s(99, 3), std::pow(100.0, -0.6), 1e-15);
  s.c[0] = 0.5;
  EXPECT_NEAR(s(1, 1), 0.5 * 0.65975, 1e-5);
  EXPECT_THROW(s(0, 4), std::out_of_range);
}

TEST(StepSizes, RamStepIsCappedAndDimensionScaled) {
  StepSizeSchedule s;
  s.ram_dimension_scaled = true;
  s.dim = 2;
  EXPECT_DOUBLE_EQ(s(1, 2), 0.9);
  EXPECT_NEAR(s(10000, 2), 2.0 * std::pow(10001.0, -0.6), 1e-15);
  EXPECT_DOUBLE_EQ(s(1, 1), std::pow(2.0, -0.6));
}

TEST(StepSizes, ValidationRejectsOutOfRange) {
  StepSizeSchedule s;
  s.xi[0] = 0.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.c[1] = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.c[2] = -1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.ram_cap = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  AdaptSettings a;
  a.alpha_star = 1.0;
  EXPECT_THROW(a.validate(), ConfigError);
  a = {};
  a.eps_clamp = 0.0;
  EXPECT_THROW(a.validate(), ConfigError);
  EXPECT_THROW(parse_adapt_mode("adam"), ConfigError);
  EXPECT_EQ(parse_adapt_mode("covg"), AdaptMode::CovGlobal);
}

TEST(TempUpdate, EqualDensitiesRaiseRhoByFullMargin) {
  TempAdaptState s;
  s.rho = RhoVector({0.0, 1.0});
  const std::vector<double> log_pi{-2.0, -2.0, -2.0};
  const auto next = temp_update(s, log_pi, 0.5);
  EXPECT_NEAR(next.rho[0], 0.766 * 0.5, 1e-15);
  EXPECT_NEAR(next.rho[1], 1.0 + 0.766 * 0.5, 1e-15);
}

TEST(TempUpdate, UsesPerPairSwapProbability) {
  TempAdaptState s;
  s.rho = RhoVector({0.0, 0.0});
  const std::vector<double> log_pi{-1.0, -3.0, -3.0};
  const auto ladder = beta_from_rho(s.rho);
  const double p = std::exp(-(ladder.beta(0) - ladder.beta(1)) * 2.0);
  const auto next = temp_update(s, log_pi, 1.0);
  EXPECT_NEAR(next.rho[0], p - 0.234, 1e-14);
  EXPECT_NEAR(next.rho[1], 0.766, 1e-14);
}

TEST(TempUpdate, GeometricLadderSharesMeanIncrement) {
  TempAdaptState s;
  s.rho = RhoVector({0.2, 0.2});
  s.geometric = true;
  const std::vector<double> log_pi{-1.0, -3.0, -3.0};
  const auto ladder = beta_from_rho(s.rho);
  const double p = std::exp(-(ladder.beta(0) - ladder.beta(1)) * 2.0);
  const auto next = temp_update(s, log_pi, 1.0);
  const double expected = 0.2 + 0.5 * ((p - 0.234) + 0.766);
  EXPECT_NEAR(next.rho[0], expected, 1e-14);
  EXPECT_EQ(next.rho[0], next.rho[1]);
}

TEST(TempUpdate, ProjectionKeepsRhoInBounds) {
  TempAdaptState s;
  s.rho = RhoVector({9.9}, RhoBounds{-10.0, 10.0});
  const std::vector<double> log_pi{0.0, 0.0};
  EXPECT_EQ(temp_update(s, log_pi, 1.0).rho[0], 10.0);
  EXPECT_THROW(temp_update(s, std::vector<double>{0.0}, 1.0), ConfigError);
}

TEST(ScaleUpdate, MovesTowardTargetAcceptance) {
  auto state = CovAdaptState::initial(settings(AdaptMode::Cov), 2, 2);
  scale_update(state, 1.0, 0, 0.1);
  EXPECT_NEAR(state.log_scale[0], 0.0766, 1e-15);
  scale_update(state, 0.0, 1, 0.1);
  EXPECT_NEAR(state.log_scale[1], -0.0234, 1e-15);
  state.log_scale[0] = 19.99;
  scale_update(state, 1.0, 0, 1.0);
  EXPECT_EQ(state.log_scale[0], 20.0);
}

TEST(AmUpdate, StepOneReplacesAndStepZeroKeeps) {
  auto state = CovAdaptState::initial(settings(AdaptMode::Cov), 1, 2);
  const Eigen::Vector2d x(1.0, 2.0);
  am_update(state, x, 0, 0.0);
  EXPECT_EQ(state.gamma[0], Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(state.mu[0], Eigen::VectorXd::Zero(2));

  am_update(state, x, 0, 1.0);
  EXPECT_EQ(state.mu[0], Eigen::VectorXd(x));
  // x x^T is singular; the zero eigenvalue is lifted to the floor.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(state.gamma[0]);
  EXPECT_NEAR(es.eigenvalues()[0], 1e-6, 1e-12);
  EXPECT_NEAR(es.eigenvalues()[1], 5.0, 1e-12);
}

TEST(AmUpdate, HarmonicStepsGiveRunningAverages) {
  std::mt19937_64 rng(8);
  auto state = CovAdaptState::initial(settings(AdaptMode::Cov, 1e-14), 1, 3);
  std::vector<Eigen::VectorXd> xs;
  for (int k = 1; k <= 200; ++k) {
    xs.push_back(random_vector(3, rng, 2.0));
    am_update(state, xs.back(), 0, 1.0 / k);
  }
  // Oracle: plain averages of x_k and of the outer products taken about the
  // mean of the preceding samples.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3), prev_mean = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(3, 3);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Eigen::VectorXd c = xs[k] - prev_mean;
    outer += c * c.transpose();
    mean += xs[k];
    prev_mean = mean / static_cast<double>(k + 1);
  }
  outer /= static_cast<double>(xs.size());
  EXPECT_LT((state.mu[0] - prev_mean).norm(), 1e-10);
  EXPECT_LT((state.gamma[0] - outer).norm(), 1e-10);
}

TEST(AmUpdate, ConvergesToGaussianCovariance) {
  std::mt19937_64 rng(21);
  Eigen::Matrix2d sigma;
  sigma << 2.0, 0.8, 0.8, 1.0;
  const Eigen::Matrix2d chol = sigma.llt().matrixL();
  const Eigen::Vector2d m(3.0, -1.0);
  auto state = CovAdaptState::initial(settings(AdaptMode::Cov), 1, 2);
  StepSizeSchedule schedule;
  for (std::size_t n = 1; n <= 100000; ++n)
    am_update(state, m + chol * random_vector(2, rng), 0, schedule(n, 2));
  EXPECT_LT((state.gamma[0] - sigma).norm() / sigma.norm(), 0.1);
  EXPECT_LT((state.mu[0] - m).norm(), 0.1);
}

TEST(AmUpdate, RefusedInRamMode) {
  auto state = CovAdaptState::initial(settings(AdaptMode::Ram), 1, 2);
  EXPECT_THROW(am_update(state, Eigen::Vector2d(1, 1), 0, 0.5), ConfigError);
}

TEST(ProjectGamma, ClampsEigenvalues) {
  Eigen::Matrix2d m;
  m << 1e-9, 0.0, 0.0, 1e9;
  const auto p = project_gamma(m, 1e-6);
  EXPECT_NEAR(p(0, 0), 1e-6, 1e-18);
  EXPECT_NEAR(p(1, 1), 1e6, 1e-6);
  const Eigen::Matrix2d ok = Eigen::Matrix2d::Identity() * 3.0;
  EXPECT_EQ(project_gamma(ok, 1e-6), Eigen::MatrixXd(ok));
}

TEST(GlobalUpdate, SingleLevelMatchesPerLevelUpdate) {
  std::mt19937_64 rng(4);
  auto local = CovAdaptState::initial(settings(AdaptMode::Cov), 1, 3);
  auto shared = CovAdaptState::initial(settings(AdaptMode::CovGlobal), 1, 3);
  for (int k = 1; k <= 50; ++k) {
    const std::vector<Eigen::VectorXd> xs{random_vector(3, rng)};
    am_update(local, xs[0], 0, 0.3);
    global_am_update(shared, xs, 0.3);
    EXPECT_LT((local.gamma[0] - shared.gamma[0]).norm(), 1e-12);
    EXPECT_LT((local.mu[0] - shared.mu[0]).norm(), 1e-12);
  }
}

TEST(GlobalUpdate, IdenticalStatesMatchOneUpdate) {
  std::mt19937_64 rng(5);
  auto local = CovAdaptState::initial(settings(AdaptMode::Cov), 1, 2);
  auto shared = CovAdaptState::initial(settings(AdaptMode::CovGlobal), 4, 2);
  const Eigen::VectorXd x = random_vector(2, rng);
  am_update(local, x, 0, 0.4);
  global_am_update(shared, std::vector<Eigen::VectorXd>(4, x), 0.4);
  EXPECT_LT((local.gamma[0] - shared.gamma[0]).norm(), 1e-12);
  EXPECT_LT((local.mu[0] - shared.mu[0]).norm(), 1e-12);
}

TEST(GlobalUpdate, MatchesExplicitLoop) {
  std::mt19937_64 rng(6);
  auto shared = CovAdaptState::initial(settings(AdaptMode::CovGlobal), 5, 3);
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
  for (int k = 1; k <= 30; ++k) {
    std::vector<Eigen::VectorXd> xs;
    for (int l = 0; l < 5; ++l) xs.push_back(random_vector(3, rng, 3.0));
    const double gamma = 1.0 / (k + 1.0);
    global_am_update(shared, xs, gamma);
    Eigen::MatrixXd next_g = (1.0 - gamma) * g;
    Eigen::VectorXd next_mu = (1.0 - gamma) * mu;
    for (const auto& x : xs) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) next_g(i, j) += gamma / 5.0 * (x[i] - mu[i]) * (x[j] - mu[j]);
      next_mu += gamma / 5.0 * x;
    }
    g = next_g;
    mu = next_mu;
    EXPECT_LT((shared.gamma[0] - g).norm(), 1e-10);
    EXPECT_LT((shared.mu[0] - mu).norm(), 1e-10);
  }
}

TEST(CholeskyRankOne, UpdateAndDowndate) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd a = random_spd(4, rng);
  Eigen::MatrixXd l = a.llt().matrixL();
  const Eigen::VectorXd w = random_vector(4, rng, 0.3);
  ASSERT_TRUE(cholesky_rank_one(l, w, 1));
  EXPECT_LT((l * l.transpose() - (a + w * w.transpose())).norm(), 1e-10);
  ASSERT_TRUE(cholesky_rank_one(l, w, -1));
  EXPECT_LT((l * l.transpose() - a).norm(), 1e-10);

  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_FALSE(cholesky_rank_one(id, Eigen::Vector2d(2.0, 0.0), -1));
  EXPECT_EQ(id, Eigen::MatrixXd::Identity(2, 2));
}

TEST(RamUpdate, MatchesDenseProductAndStaysPositiveDefinite) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> acc(0.0, 1.0);
  auto state = CovAdaptState::initial(settings(AdaptMode::Ram), 1, 3);
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(3, 3);
  for (std::size_t n = 1; n <= 1000; ++n) {
    const Eigen::VectorXd z = random_vector(3, rng);
    const double a = acc(rng);
    const double gamma = std::min(0.9, 3.0 * std::pow(n + 1.0, -0.6));
    const Eigen::MatrixXd l = s.llt().matrixL();
    const Eigen::VectorXd u = z / z.norm();
    const Eigen::MatrixXd next =
        l * (Eigen::MatrixXd::Identity(3, 3) + gamma * (a - 0.234) * u * u.transpose()) * l.transpose();
    ASSERT_TRUE(ram_update(state, z, a, 0, gamma));
    s = next;
    const Eigen::MatrixXd& g = state.gamma[0];
    EXPECT_LT((g * g.transpose() - s).norm(), 1e-10 * s.norm());
    EXPECT_LT((g - Eigen::MatrixXd(s.llt().matrixL())).norm(), 1e-10 * g.norm());
    EXPECT_GT(g.diagonal().minCoeff(), 0.0);
  }
}

TEST(RamUpdate, NoChangeAtTargetAcceptanceOrZeroDirection) {
  auto state = CovAdaptState::initial(settings(AdaptMode::Ram), 1, 2);
  state.gamma[0] << 2.0, 0.0, 0.5, 1.0;
  const Eigen::MatrixXd before = state.gamma[0];
  EXPECT_TRUE(ram_update(state, Eigen::Vector2d(1.0, 1.0), 0.234, 0, 0.5));
  EXPECT_EQ(state.gamma[0], before);
  EXPECT_TRUE(ram_update(state, Eigen::Vector2d::Zero(), 0.9, 0, 0.5));
  EXPECT_EQ(state.gamma[0], before);
}

TEST(RamUpdate, ShapeUsesFactorDirectly) {
  auto state = CovAdaptState::initial(settings(AdaptMode::Ram), 1, 2);
  state.gamma[0] << 2.0, 0.0, 0.5, 1.0;
  state.refresh_shape(0);
  const Eigen::MatrixXd& g = state.gamma[0];
  EXPECT_LT((state.shape(0).covariance() - g * g.transpose()).norm(), 1e-14);
}
