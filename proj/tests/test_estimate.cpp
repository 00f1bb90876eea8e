#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace etpr;

namespace {

// m curves drawn from the Gaussian model with SE(η₀ = 1, η₁ = 2) and φ = 0.05.
Dataset gaussian_curves(int m, int n, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.m = m;
  cfg.n = n;
  cfg.design.grid_size = 60;
  cfg.theta_true = {1.0, 2.0, 1e-12};
  cfg.phi_true = 0.05;
  cfg.seed = seed;
  return generate(cfg, 0).train;
}

const KernelConfig& se1() {
  static const KernelConfig k({{KernelFamily::SE, {1.0, 1.0}}}, 1);
  return k;
}

}  // namespace

TEST(Bfgs, MinimizesRosenbrock) {
  const Objective f = [](const Vector& x, Vector& g) {
    g.resize(2);
    g(0) = -2.0 * (1.0 - x(0)) - 400.0 * x(0) * (x(1) - x(0) * x(0));
    g(1) = 200.0 * (x(1) - x(0) * x(0));
    return (1.0 - x(0)) * (1.0 - x(0)) + 100.0 * (x(1) - x(0) * x(0)) * (x(1) - x(0) * x(0));
  };
  Vector x0(2);
  x0 << -1.2, 1.0;
  const auto r = bfgs_minimize(f, x0);
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.x(0), 1.0, 1e-7);
  EXPECT_NEAR(r.x(1), 1.0, 1e-7);
}

TEST(Bfgs, BacksOffInfeasibleRegion) {
  // f = x − log x on x > 0, infeasible elsewhere; minimum at 1.
  const Objective f = [](const Vector& x, Vector& g) {
    g.resize(1);
    if (x(0) <= 0.0) return std::numeric_limits<double>::infinity();
    g(0) = 1.0 - 1.0 / x(0);
    return x(0) - std::log(x(0));
  };
  Vector x0(1);
  x0 << 8.0;
  const auto r = bfgs_minimize(f, x0);
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.x(0), 1.0, 1e-8);
  Vector bad(1);
  bad << -1.0;
  EXPECT_FALSE(bfgs_minimize(f, bad).converged);
}

TEST(Fit, RecoversGaussianParameters) {
  const Dataset d = gaussian_curves(30, 20, 5);
  FitOptions o;
  o.mode = FitMode::GPR;
  o.restarts = 3;
  const auto fm = fit(d, se1(), o);
  EXPECT_TRUE(fm.converged);
  EXPECT_LE(fm.final_gradient_norm, 1e-8);
  const Vector b = fm.params.beta();
  EXPECT_NEAR(b(0), 0.05, 0.3 * 0.05);
  EXPECT_NEAR(b(1), 1.0, 0.5);
  EXPECT_NEAR(b(2), 2.0, 1.0);
  ASSERT_TRUE(fm.std_errors);
  for (int k = 0; k < 3; ++k) EXPECT_GT((*fm.std_errors)(k), 0.0);
}

TEST(Fit, StationaryPointOfLikelihood) {
  const Dataset d = gaussian_curves(4, 12, 6);
  FitOptions o;
  o.nu_policy = NuPolicy::fixed(2.5);
  const auto fm = fit(d, se1(), o);
  ASSERT_TRUE(fm.converged);
  const Vector g = score_log_beta(fm.data, fm.params, fm.caches);
  EXPECT_LE(g.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(fm.log_likelihood, log_marginal_likelihood(d, fm.params));
  // No restart or neighbouring point does better.
  for (double f : {0.97, 1.03}) {
    Vector b = fm.params.beta();
    b(0) *= f;
    EXPECT_LT(log_marginal_likelihood(d, fm.params.with_beta(b)), fm.log_likelihood);
  }
}

TEST(Fit, StandardErrorsMatchNumericalHessian) {
  const Dataset d = gaussian_curves(6, 15, 7);
  FitOptions o;
  o.nu_policy = NuPolicy::fixed(3.0);
  const auto fm = fit(d, se1(), o);
  ASSERT_TRUE(fm.converged && fm.std_errors);
  const Vector lb = fm.params.beta().array().log();
  const auto l = [&](const Vector& x) { return log_marginal_likelihood(d, fm.params.with_beta(x.array().exp())); };
  const int nb = static_cast<int>(lb.size());
  Matrix h(nb, nb);
  const double e = 1e-3;
  for (int a = 0; a < nb; ++a)
    for (int b = 0; b < nb; ++b) {
      Vector pp = lb, pm = lb, mp = lb, mm = lb;
      pp(a) += e; pp(b) += e;
      pm(a) += e; pm(b) -= e;
      mp(a) -= e; mp(b) += e;
      mm(a) -= e; mm(b) -= e;
      h(a, b) = (l(pp) - l(pm) - l(mp) + l(mm)) / (4.0 * e * e);
    }
  const Matrix cov = (-h).inverse();
  for (int a = 0; a < nb; ++a) {
    const double se = std::exp(lb(a)) * std::sqrt(cov(a, a));
    EXPECT_NEAR((*fm.std_errors)(a) / se, 1.0, 1e-3) << fm.params.beta_names()[static_cast<std::size_t>(a)];
  }
}

TEST(Fit, EstimatesNuWithSeveralCurves) {
  const Dataset d = gaussian_curves(5, 12, 8);
  FitOptions o;
  o.nu_policy = NuPolicy::estimate();
  const auto fm = fit(d, se1(), o);
  EXPECT_GT(fm.params.nu(), 1.0);
  // The fitted ν maximizes the profile over a coarse grid.
  FitOptions po = o;
  po.restarts = 2;
  const auto rows = profile_nu(d, se1(), po, {1.5, 3.0, 10.0});
  for (const auto& r : rows) {
    ASSERT_TRUE(r.log_likelihood) << r.error;
    EXPECT_LE(*r.log_likelihood, fm.log_likelihood + 1e-6) << "nu=" << r.nu;
  }
}

TEST(Fit, RejectsUnidentifiableOptions) {
  const Dataset one = gaussian_curves(1, 10, 9);
  FitOptions o;
  o.nu_policy = NuPolicy::estimate();
  try {
    fit(one, se1(), o);
    FAIL() << "expected InvalidOptions";
  } catch (const InvalidOptions& e) {
    EXPECT_NE(std::string(e.what()).find("m = 1"), std::string::npos);
  }
  FitOptions g;
  g.mode = FitMode::GPR;
  g.nu_policy = NuPolicy::estimate();
  EXPECT_THROW(fit(gaussian_curves(2, 10, 9), se1(), g), InvalidOptions);
  FitOptions r;
  r.restarts = 0;
  EXPECT_THROW(fit(one, se1(), r), InvalidOptions);
  EXPECT_THROW(fit(one, KernelConfig({{KernelFamily::SE, {1.0, 1.0, 1.0}}}, 2), FitOptions{}), DimensionError);
}

TEST(Fit, DeterministicAcrossThreadCounts) {
  const Dataset d = gaussian_curves(3, 10, 10);
  FitOptions o;
  o.nu_policy = NuPolicy::estimate();
  o.seed = 77;
  o.threads = 1;
  const auto a = fit(d, se1(), o);
  o.threads = 4;
  const auto b = fit(d, se1(), o);
  EXPECT_EQ(a.params.beta(), b.params.beta());
  EXPECT_EQ(a.params.nu(), b.params.nu());
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
  EXPECT_EQ(a.best_restart, b.best_restart);
}

TEST(Fit, SingleCurveScaleInflation) {
  // One curve with an amplitude-homogeneous kernel: the eTPR fit at ν scales
  // φ by ν/(ν−1) relative to the Gaussian fit.
  const Dataset d = gaussian_curves(1, 10, 11);
  const KernelConfig k({{KernelFamily::SE, {1.0, 1.0}}, {KernelFamily::LIN, {1.0}}}, 1);
  FitOptions g;
  g.mode = FitMode::GPR;
  const auto fg = fit(d, k, g);
  FitOptions e;
  e.nu_policy = NuPolicy::fixed(1.05);
  const auto fe = fit(d, k, e);
  ASSERT_TRUE(fg.converged && fe.converged);
  EXPECT_NEAR(fe.params.phi() / fg.params.phi(), 21.0, 21.0 * 1e-3);
}
