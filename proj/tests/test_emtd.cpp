#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>

#include <array>
#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace etpr;
using boost::math::quadrature::exp_sinh;
using boost::math::quadrature::sinh_sinh;

namespace {

EmtdParams make_2d(double nu, double omega) {
  Matrix s(2, 2);
  s << 1.3, 0.4, 0.4, 0.8;
  Vector mu(2);
  mu << 0.2, -0.5;
  return EmtdParams(nu, omega, mu, s);
}

double density_1d(double z, double nu, double omega, double mu, double s) {
  Vector v(1);
  v << z;
  Vector m(1);
  m << mu;
  Matrix sc(1, 1);
  sc << s;
  return std::exp(emtd_log_density(v, EmtdParams(nu, omega, m, sc)));
}

}  // namespace

TEST(EmtdDensity, NormalizesInOneDimension) {
  sinh_sinh<double> q;
  for (auto [nu, omega] : {std::array{0.7, 1.3}, std::array{1.05, 0.05}, std::array{3.0, 2.0}, std::array{20.0, 19.0}}) {
    const double total = q.integrate([&](double z) { return density_1d(z, nu, omega, 0.3, 1.7); });
    EXPECT_NEAR(total, 1.0, 1e-6) << "nu=" << nu << " omega=" << omega;
  }
}

TEST(EmtdDensity, NormalizesInTwoDimensions) {
  for (auto [nu, omega] : {std::array{1.5, 0.5}, std::array{4.0, 3.0}}) {
    const EmtdParams p = make_2d(nu, omega);
    sinh_sinh<double> q;
    const double total = q.integrate([&](double a) {
      sinh_sinh<double> inner;
      return inner.integrate([&](double b) {
        Vector z(2);
        z << a, b;
        return std::exp(emtd_log_density(z, p));
      });
    });
    EXPECT_NEAR(total, 1.0, 1e-6) << "nu=" << nu;
  }
}

TEST(EmtdDensity, MatchesStudentTWhenScaleEqualsShape) {
  // ω = ν gives t_{2ν} with scale √(ω s/ν).
  const double nu = 2.5, s = 1.7, mu = -0.4;
  const boost::math::students_t t(2.0 * nu);
  for (double z : {-6.0, -1.0, 0.0, 0.3, 2.0, 15.0}) {
    const double scale = std::sqrt(s);
    const double ref = boost::math::pdf(t, (z - mu) / scale) / scale;
    EXPECT_NEAR(std::log(density_1d(z, nu, nu, mu, s)), std::log(ref), 1e-12);
  }
}

TEST(EmtdDensity, RejectsBadArguments) {
  Matrix s = Matrix::Identity(2, 2);
  EXPECT_THROW(EmtdParams(0.0, 1.0, Vector::Zero(2), s), InvalidParameter);
  EXPECT_THROW(EmtdParams(1.0, -1.0, Vector::Zero(2), s), InvalidParameter);
  EXPECT_THROW(EmtdParams(1.0, 1.0, Vector::Zero(3), s), DimensionError);
  Matrix bad = s;
  bad(0, 1) = 0.3;
  EXPECT_THROW(EmtdParams(1.0, 1.0, Vector::Zero(2), bad), InvalidParameter);
  Matrix neg = -s;
  EXPECT_THROW(EmtdParams(1.0, 1.0, Vector::Zero(2), neg), SingularScale);
  const EmtdParams p(1.0, 1.0, Vector::Zero(2), s);
  EXPECT_THROW(emtd_log_density(Vector::Zero(3), p), DimensionError);
}

TEST(EmtdMoments, ExposedOnlyWhereDefined) {
  const auto p = make_2d(0.5, 1.0);
  EXPECT_FALSE(p.expectation());
  EXPECT_FALSE(p.covariance());
  const auto q = make_2d(1.2, 1.0);
  EXPECT_TRUE(q.expectation());
  EXPECT_TRUE(q.covariance());
  EXPECT_FALSE(q.skewness());
  EXPECT_FALSE(q.kurtosis());
  const auto r = make_2d(2.5, 1.0);
  ASSERT_TRUE(r.kurtosis());
  EXPECT_DOUBLE_EQ(*r.kurtosis(), 3.0 / 0.5 + 3.0);
}

TEST(EmtdMoments, VarianceAndKurtosisMatchQuadrature) {
  const double nu = 4.5, omega = 2.0, s = 0.7;
  exp_sinh<double> q;
  auto moment = [&](int k) {
    return 2.0 * q.integrate([&](double z) {
      const double d = density_1d(z, nu, omega, 0.0, s);
      return d > 0.0 ? std::pow(z, k) * d : 0.0;
    });
  };
  Matrix sc(1, 1);
  sc << s;
  const EmtdParams p(nu, omega, Vector::Zero(1), sc);
  EXPECT_NEAR(moment(2), (*p.covariance())(0, 0), 1e-9);
  EXPECT_NEAR(moment(4) / (moment(2) * moment(2)), *p.kurtosis(), 1e-8);
}

TEST(EmtdMarginal, MatchesIntegratedJoint) {
  const EmtdParams p = make_2d(1.7, 0.9);
  const std::array<int, 1> keep{1};
  const EmtdParams m = emtd_marginal(p, keep);
  EXPECT_DOUBLE_EQ(m.nu(), p.nu());
  EXPECT_DOUBLE_EQ(m.omega(), p.omega());
  sinh_sinh<double> q;
  for (double b : {-2.0, 0.1, 3.0}) {
    const double integrated = q.integrate([&](double a) {
      Vector z(2);
      z << a, b;
      return std::exp(emtd_log_density(z, p));
    });
    Vector zb(1);
    zb << b;
    EXPECT_NEAR(std::log(integrated), emtd_log_density(zb, m), 1e-8);
  }
}

TEST(EmtdMarginal, RejectsBadIndices) {
  const EmtdParams p = make_2d(1.7, 0.9);
  const std::array<int, 1> out_of_range{2};
  const std::array<int, 2> repeated{0, 0};
  EXPECT_THROW(emtd_marginal(p, out_of_range), IndexError);
  EXPECT_THROW(emtd_marginal(p, repeated), IndexError);
}

TEST(EmtdConditional, EqualsJointOverMarginal) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5;
    const Matrix s = test::random_spd(n, rng);
    const Vector mu = test::random_vector(n, rng);
    const double nu = 0.6 + 3.0 * std::uniform_real_distribution<double>()(rng);
    const double omega = 0.2 + 2.0 * std::uniform_real_distribution<double>()(rng);
    const EmtdParams p(nu, omega, mu, s);
    const std::array<int, 2> obs{3, 1};
    const Vector z = test::random_vector(n, rng, 2.0);
    Vector z1(2);
    z1 << z(3), z(1);
    const EmtdParams c = emtd_conditional(p, obs, z1);
    Vector z2(3);
    z2 << z(0), z(2), z(4);
    const double lhs = emtd_log_density(z2, c);
    const double rhs = emtd_log_density(z, p) - emtd_log_density(z1, emtd_marginal(p, obs));
    EXPECT_NEAR(lhs, rhs, 1e-10);
    EXPECT_DOUBLE_EQ(c.nu(), nu + 1.0);
    EXPECT_DOUBLE_EQ(c.omega(), omega + 1.0);
  }
}

TEST(EmtdConditional, RejectsWrongObservationLength) {
  const EmtdParams p = make_2d(1.7, 0.9);
  const std::array<int, 1> obs{0};
  EXPECT_THROW(emtd_conditional(p, obs, Vector::Zero(2)), DimensionError);
}

TEST(EmtdLinearMap, ProjectionMatchesMarginal) {
  const EmtdParams p = make_2d(2.2, 1.4);
  Matrix a(1, 2);
  a << 0.0, 1.0;
  const auto l = emtd_linear_map(p, a);
  const std::array<int, 1> keep{1};
  const auto m = emtd_marginal(p, keep);
  EXPECT_NEAR(l.mean()(0), m.mean()(0), 1e-15);
  EXPECT_NEAR(l.scale()(0, 0), m.scale()(0, 0), 1e-15);
  Matrix wide(3, 2);
  wide << 1, 0, 0, 1, 1, 1;
  EXPECT_THROW(emtd_linear_map(p, wide), RankError);
  EXPECT_THROW(emtd_linear_map(p, Matrix::Identity(3, 3)), DimensionError);
}

TEST(EmtdSample, MomentsWithinMonteCarloError) {
  const EmtdParams p = make_2d(3.5, 1.8);
  const int count = 200000;
  const Matrix draws = emtd_sample(p, count, 42);
  const Vector mean = draws.colwise().mean().transpose();
  const Matrix centered = draws.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / (count - 1);
  const Matrix truth = *p.covariance();
  for (int i = 0; i < 2; ++i) {
    const double se_mean = std::sqrt(truth(i, i) / count);
    EXPECT_LT(std::abs(mean(i) - p.mean()(i)), 4.0 * se_mean);
    for (int j = 0; j < 2; ++j) {
      const Vector prod = centered.col(i).cwiseProduct(centered.col(j));
      const double sd = std::sqrt((prod.array() - prod.mean()).square().sum() / (count - 1));
      EXPECT_LT(std::abs(cov(i, j) - truth(i, j)), 4.0 * sd / std::sqrt(count)) << i << "," << j;
    }
  }
}

TEST(EmtdSample, PureFunctionOfSeed) {
  const EmtdParams p = make_2d(3.5, 1.8);
  const Matrix a = emtd_sample(p, 50, 9);
  const Matrix b = emtd_sample(p, 80, 9);
  EXPECT_EQ(a, b.topRows(50));
  EXPECT_NE(a, emtd_sample(p, 50, 10));
}

TEST(InverseGamma, MomentsMatchQuadrature) {
  const IgParams ig(3.7, 2.1);
  exp_sinh<double> q;
  const double mass = q.integrate([&](double r) { return std::exp(ig.log_density(r)); });
  const double m1 = q.integrate([&](double r) { return r * std::exp(ig.log_density(r)); });
  const double m2 = q.integrate([&](double r) { return r * r * std::exp(ig.log_density(r)); });
  EXPECT_NEAR(mass, 1.0, 1e-10);
  EXPECT_NEAR(m1, *ig.mean(), 1e-10);
  EXPECT_NEAR(m2 - m1 * m1, *ig.variance(), 1e-9);
  EXPECT_FALSE(IgParams(0.9, 1.0).mean());
  EXPECT_FALSE(IgParams(1.5, 1.0).variance());
}

TEST(RPosterior, MomentsMatchQuadratureOfJoint) {
  // p(r | z) ∝ IG(r; ν, ω) N(z; μ, rΣ), integrated numerically.
  std::mt19937_64 rng(3);
  const int n = 4;
  const Matrix s = test::random_spd(n, rng);
  const EmtdParams p(1.3, 0.8, Vector::Zero(n), s);
  const Vector z = test::random_vector(n, rng, 1.5);
  const double qz = p.mahalanobis(z);
  const IgParams prior(p.nu(), p.omega());
  auto joint = [&](double r) {
    return std::exp(prior.log_density(r) - 0.5 * n * std::log(r) - 0.5 * qz / r);
  };
  exp_sinh<double> quad;
  const double z0 = quad.integrate(joint);
  const double m1 = quad.integrate([&](double r) { return r * joint(r); }) / z0;
  const double m2 = quad.integrate([&](double r) { return r * r * joint(r); }) / z0;
  const auto post = r_posterior(p, z);
  ASSERT_TRUE(post.mean && post.variance);
  EXPECT_NEAR(*post.mean / m1 - 1.0, 0.0, 1e-8);
  EXPECT_NEAR(*post.variance / (m2 - m1 * m1) - 1.0, 0.0, 1e-8);
  EXPECT_DOUBLE_EQ(post.law.shape, 0.5 * n + p.nu());
  EXPECT_DOUBLE_EQ(post.law.scale, p.omega() + 0.5 * qz);
}
