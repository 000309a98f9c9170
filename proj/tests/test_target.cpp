#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "apt/target.hpp"

using namespace apt;

namespace {

// Direct evaluation without log-sum-exp, for moderate arguments only.
double naive_mixture_log_density(const GaussianMixtureSpec& spec, const Eigen::VectorXd& x) {
  const double d = static_cast<double>(x.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < spec.components(); ++k) {
    const double r2 = (x - spec.means[k]).squaredNorm();
    sum += spec.weights[k] * std::exp(-0.5 * r2 / spec.variance) /
           std::pow(2.0 * std::numbers::pi * spec.variance, d / 2.0);
  }
  return std::log(sum);
}

GaussianMixtureSpec two_component() {
  GaussianMixtureSpec s;
  s.means = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 2.0)};
  s.weights = {0.3, 0.7};
  s.variance = 0.5;
  return s;
}

}  // namespace

TEST(MixtureLogDensity, MatchesDirectSum) {
  const auto spec = two_component();
  GaussianMixture target(spec);
  for (double a : {-1.0, 0.0, 0.5, 2.0})
    for (double b : {-0.5, 1.0, 3.0}) {
      const Eigen::Vector2d x(a, b);
      EXPECT_NEAR(target.log_density(x), naive_mixture_log_density(spec, x), 1e-12);
    }
}

TEST(MixtureLogDensity, StaysFiniteFarFromEveryMode) {
  GaussianMixture target(canonical_mixture(0.001, 8));
  Eigen::VectorXd x = Eigen::VectorXd::Constant(8, 1e4);
  const double v = target.log_density(x);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_LT(v, -1e9);
}

TEST(MixtureLogDensity, DimensionMismatchIsConfigError) {
  GaussianMixture target(two_component());
  EXPECT_THROW(target.log_density(Eigen::VectorXd::Zero(3)), ConfigError);
}

TEST(MixtureSpec, ValidationRejectsBadInput) {
  auto s = two_component();
  s.weights = {0.5, 0.4};
  EXPECT_THROW(s.validate(), ConfigError);
  s = two_component();
  s.variance = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = two_component();
  s.means[1] = Eigen::Vector3d(1, 2, 3);
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(MixtureSpec, MomentsOfTwoComponents) {
  const auto s = two_component();
  EXPECT_NEAR(s.mean()[0], 0.7, 1e-15);
  EXPECT_NEAR(s.mean()[1], 1.4, 1e-15);
  EXPECT_NEAR(s.second_moment()[0], 0.5 + 0.7, 1e-15);
  EXPECT_NEAR(s.second_moment()[1], 0.5 + 0.7 * 4.0, 1e-15);
}

TEST(MixtureSpec, PaddingAppendsZeroCoordinates) {
  const auto s = two_component().padded(5);
  EXPECT_EQ(s.dim(), 5u);
  EXPECT_DOUBLE_EQ(s.means[1][1], 2.0);
  EXPECT_DOUBLE_EQ(s.means[1][4], 0.0);
  EXPECT_THROW(s.padded(2), ConfigError);
}

TEST(CanonicalMixture, TrueValuesMatchPublishedTable) {
  const auto s = canonical_mixture();
  ASSERT_EQ(s.components(), 20u);
  ASSERT_EQ(s.dim(), 2u);
  EXPECT_NEAR(s.mean()[0], 4.478, 5e-4);
  EXPECT_NEAR(s.mean()[1], 4.905, 5e-4);
  EXPECT_NEAR(s.second_moment()[0], 25.605, 5e-4);
  EXPECT_NEAR(s.second_moment()[1], 33.920, 5e-4);
}

TEST(CanonicalMixture, HardVariantIsPaddedWithZeroMeans) {
  const auto s = canonical_mixture(0.001, 8);
  EXPECT_EQ(s.dim(), 8u);
  EXPECT_DOUBLE_EQ(s.variance, 0.001);
  for (const auto& m : s.means) EXPECT_EQ(m.tail(6).norm(), 0.0);
  EXPECT_NEAR(s.second_moment()[7], 0.001, 1e-15);
}

TEST(MixtureFile, RoundTripsThroughWriter) {
  const auto s = two_component();
  std::stringstream io;
  write_mixture(io, s);
  const auto back = parse_mixture(io);
  ASSERT_EQ(back.components(), 2u);
  EXPECT_EQ(back.variance, s.variance);
  EXPECT_EQ(back.weights, s.weights);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(back.means[k], s.means[k]);
}

TEST(MixtureFile, ParsesEqualWeights) {
  std::istringstream in("# apt-mixture v1\nvariance 0.25\nweights equal\nmean 0 0\nmean 1 1\n");
  const auto s = parse_mixture(in);
  EXPECT_EQ(s.weights, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(s.variance, 0.25);
}

TEST(MixtureFile, RejectsMalformedInput) {
  std::istringstream missing_variance("weights equal\nmean 0\n");
  EXPECT_THROW(parse_mixture(missing_variance), ConfigError);
  std::istringstream bad_key("# apt-mixture v1\nvariance 1\nweights equal\nmean 0\ncolour red\n");
  EXPECT_THROW(parse_mixture(bad_key), ConfigError);
}

TEST(LogDensityFunction, WrapsArbitraryCallables) {
  LogDensityFunction f(1, [](const ContinuousState& x) { return -0.5 * x.squaredNorm(); });
  EXPECT_EQ(f.dim(), 1u);
  EXPECT_DOUBLE_EQ(f.log_density(Eigen::VectorXd::Constant(1, 2.0)), -2.0);
}
