#ifndef ETPR_ESTIMATE_HPP
#define ETPR_ESTIMATE_HPP

// Maximum-likelihood fitting of (φ, θ) and optionally ν.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "etpr/errors.hpp"
#include "etpr/model.hpp"
#include "etpr/optimize.hpp"
#include "etpr/parallel.hpp"
#include "etpr/rng.hpp"

namespace etpr {

enum class FitMode { ETPR, GPR };

struct NuPolicy {
  enum class Kind { FIXED, ESTIMATE };
  Kind kind = Kind::FIXED;
  double value = 1.05;  // fixed value, or the first restart's start when estimating

  static NuPolicy fixed(double v) { return {Kind::FIXED, v}; }
  static NuPolicy estimate(double start = 3.0) { return {Kind::ESTIMATE, start}; }
  bool estimated() const { return kind == Kind::ESTIMATE; }
};

struct FitOptions {
  FitMode mode = FitMode::ETPR;
  NuPolicy nu_policy;
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8;
  int restarts = 5;
  std::uint64_t seed = 0;
  bool tie = true;
  std::optional<double> initial_phi;  // first restart; default 0.1·var(y)
  int threads = 1;
};

struct FittedModel : Model {
  explicit FittedModel(Model m) : Model(std::move(m)) {}

  std::optional<Vector> std_errors;
  bool converged = false;
  double final_gradient_norm = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  int best_restart = 0;
  int failed_restarts = 0;
  std::vector<std::string> warnings;
  FitOptions options;
};

inline constexpr double kNuShift = 1e-6;
/// ν − 1 beyond which an estimate is treated as diverging to the Gaussian limit.
inline constexpr double kNuDivergence = 1e6;

namespace detail {

inline double pooled_variance(const Dataset& data) {
  double s = 0.0, ss = 0.0;
  int n = 0;
  for (const auto& c : data.curves)
    for (Eigen::Index j = 0; j < c.y.size(); ++j) {
      s += c.y(j);
      ss += c.y(j) * c.y(j);
      ++n;
    }
  if (n < 2) return 1.0;
  const double mean = s / n;
  const double v = (ss - n * mean * mean) / (n - 1);
  return v > 1e-12 ? v : 1.0;
}

inline void check_fit_options(const Dataset& data, const FitOptions& opts) {
  if (opts.mode == FitMode::GPR && opts.nu_policy.estimated())
    throw InvalidOptions("nu cannot be estimated in GPR mode");
  if (opts.mode == FitMode::ETPR) {
    if (opts.nu_policy.estimated() && data.size() < 2)
      throw InvalidOptions("nu is not estimable with a single curve (m = 1): the lone scale r1 is not identifiable; use a fixed nu");
    if (!(opts.nu_policy.value > kNuLowerBound) || !std::isfinite(opts.nu_policy.value))
      throw InvalidOptions("nu value must be finite and greater than 1");
  }
  if (opts.restarts < 1) throw InvalidOptions("restarts must be at least 1");
  if (opts.max_iterations < 1) throw InvalidOptions("max_iterations must be at least 1");
  if (!(opts.gradient_tolerance > 0.0)) throw InvalidOptions("gradient_tolerance must be positive");
}

// Optimizer coordinates: x = (log β, [log(ν − 1 − 1e-6)]). Points with
// |x − center| > 40 in any coordinate are infeasible.
struct FitProblem {
  const Dataset& data;
  ModelParams base;
  bool estimate_nu;
  double fixed_nu;
  Vector center = Vector();

  int nb() const { return base.beta_size(); }

  ModelParams params_at(const Vector& x) const {
    const Vector beta = x.head(nb()).array().exp();
    const double nu = estimate_nu ? 1.0 + kNuShift + std::exp(x(nb())) : fixed_nu;
    return base.with_beta(beta).with_nu(nu);
  }

  Vector coords(const ModelParams& p) const {
    Vector x(nb() + (estimate_nu ? 1 : 0));
    x.head(nb()) = p.beta().array().log();
    if (estimate_nu) x(nb()) = std::log(p.nu() - 1.0 - kNuShift);
    return x;
  }

  // −l and −∇l in optimizer coordinates.
  double operator()(const Vector& x, Vector& grad) const {
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
    const double reach = center.size() == x.size() ? (x - center).cwiseAbs().maxCoeff() : x.cwiseAbs().maxCoeff();
    if (reach > 40.0) return std::numeric_limits<double>::infinity();
    try {
      const ModelParams p = params_at(x);
      const auto caches = make_caches(data, p);
      const double l = log_marginal_likelihood(caches, p.nu());
      grad.resize(x.size());
      grad.head(nb()) = -score_log_beta(data, p, caches);
      if (estimate_nu) grad(nb()) = -score_nu(caches, p.nu()) * std::exp(x(nb()));
      return -l;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  }
};

}  // namespace detail

/// Square roots of diag((−∂²l/∂logβ²)⁻¹), mapped to the natural scale by the
/// delta method. Empty when the negative Hessian is not positive definite.
inline std::optional<Vector> standard_errors(const Model& model) {
  const Vector beta = model.params.beta();
  const Matrix h = hessian_beta(model.data, model.params, model.caches);
  const Vector g = score_beta(model.data, model.params, model.caches);
  Matrix hl = beta.asDiagonal() * h * beta.asDiagonal();
  hl.diagonal() += beta.cwiseProduct(g);
  const Matrix neg = -0.5 * (hl + hl.transpose());
  Eigen::LLT<Matrix> llt(neg);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Matrix cov = llt.solve(Matrix::Identity(neg.rows(), neg.cols()));
  Vector se(beta.size());
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    if (!(cov(k, k) > 0.0)) return std::nullopt;
    se(k) = beta(k) * std::sqrt(cov(k, k));
  }
  return se;
}

/// Multi-start quasi-Newton maximization of l(β; ν). Restart 0 starts at the
/// supplied kernel values; restart r ≥ 1 draws each β entry log-uniformly in
/// [1e-3, 1e2] from stream r of `seed`, with φ and kernel amplitudes scaled by
/// the pooled variance of y. With one curve, fixed finite ν and an
/// amplitude-homogeneous kernel, the log-likelihood in log β is the Gaussian
/// one translated by log(ν/(ν−1)) along φ and the amplitudes; starts and the
/// feasible box are translated the same way.
inline FittedModel fit(const Dataset& data, const KernelConfig& kernel, const FitOptions& opts) {
  data.validate();
  if (kernel.input_dim() != data.input_dim) throw DimensionError("kernel input dimension does not match data");
  detail::check_fit_options(data, opts);

  const bool gpr = opts.mode == FitMode::GPR;
  const bool est = !gpr && opts.nu_policy.estimated();
  const double vy = detail::pooled_variance(data);
  std::vector<KernelConfig> ks(opts.tie ? 1 : static_cast<std::size_t>(data.size()), kernel);
  const double nu0 = gpr ? kNuInfinity : opts.nu_policy.value;
  const ModelParams start0(opts.initial_phi.value_or(0.1 * vy), ks, nu0);
  detail::FitProblem problem{data, start0, est, nu0};

  BfgsOptions bo;
  bo.max_iterations = opts.max_iterations;
  bo.gradient_tolerance = opts.gradient_tolerance;

  const auto amps = [&] {
    std::vector<bool> is_amp(static_cast<std::size_t>(start0.beta_size()), false);
    is_amp[0] = true;
    for (int c = 0; c < static_cast<int>(ks.size()); ++c) {
      const int off = start0.kernel_offset(c);
      for (int a : ks[static_cast<std::size_t>(c)].amplitude_indices()) is_amp[static_cast<std::size_t>(off + a)] = true;
    }
    return is_amp;
  }();

  const double shift = (!gpr && !est && data.size() == 1 && kernel.is_amplitude_homogeneous())
                           ? std::log(nu0 / (nu0 - 1.0))
                           : 0.0;
  problem.center = Vector::Zero(problem.nb() + (est ? 1 : 0));
  for (int k = 0; k < problem.nb(); ++k)
    if (amps[static_cast<std::size_t>(k)]) problem.center(k) = shift;

  if (est) bo.stop = [nb = problem.nb()](const Vector& x) { return x(nb) > std::log(kNuDivergence); };

  std::vector<OptimResult> results(static_cast<std::size_t>(opts.restarts));
  std::vector<char> diverged(static_cast<std::size_t>(opts.restarts), 0);
  parallel_for(opts.restarts, opts.threads, [&](int r) {
    Vector x0;
    if (r == 0) {
      x0 = problem.coords(start0) + problem.center;
    } else {
      CounterRng rng(opts.seed, static_cast<std::uint64_t>(r));
      std::uniform_real_distribution<double> u(std::log(1e-3), std::log(1e2));
      x0.resize(problem.nb() + (est ? 1 : 0));
      for (int k = 0; k < problem.nb(); ++k) {
        x0(k) = u(rng);
        if (amps[static_cast<std::size_t>(k)]) x0(k) += std::log(vy) + shift;
      }
      if (est) {
        std::uniform_real_distribution<double> un(std::log(0.1), std::log(10.0));
        x0(problem.nb()) = un(rng);
      }
    }
    OptimResult res = bfgs_minimize(std::cref(problem), x0, bo);
    if (est && std::isfinite(res.value) && res.x(problem.nb()) > std::log(kNuDivergence)) {
      // Hold ν where the search stopped and finish β.
      const double nu = problem.params_at(res.x).nu();
      const detail::FitProblem inner{data, start0, false, nu};
      BfgsOptions ib = bo;
      ib.stop = nullptr;
      const OptimResult polished = bfgs_minimize(std::cref(inner), res.x.head(problem.nb()), ib);
      if (std::isfinite(polished.value) && polished.value <= res.value) {
        Vector x = res.x;
        x.head(problem.nb()) = polished.x;
        Vector g;
        res.value = problem(x, g);
        res.x = x;
        res.grad = g;
        res.iterations += polished.iterations;
      }
      res.converged = res.grad.cwiseAbs().maxCoeff() <= opts.gradient_tolerance;
      res.message = "nu estimate diverged toward the Gaussian limit";
      diverged[static_cast<std::size_t>(r)] = 1;
    }
    results[static_cast<std::size_t>(r)] = std::move(res);
  });

  int best = -1, failed = 0;
  for (int r = 0; r < opts.restarts; ++r) {
    const auto& res = results[static_cast<std::size_t>(r)];
    if (!std::isfinite(res.value)) {
      ++failed;
      continue;
    }
    if (best < 0 || res.value < results[static_cast<std::size_t>(best)].value) best = r;
  }
  if (best < 0) throw SingularScale("every restart failed to produce a finite likelihood");

  const auto& res = results[static_cast<std::size_t>(best)];
  FittedModel fm(Model::make(data, problem.params_at(res.x)));
  fm.log_likelihood = fm.Model::log_likelihood();
  fm.final_gradient_norm = res.grad.cwiseAbs().maxCoeff();
  fm.converged = res.converged;
  fm.iterations = res.iterations;
  fm.best_restart = best;
  fm.failed_restarts = failed;
  fm.options = opts;
  if (diverged[static_cast<std::size_t>(best)])
    fm.warnings.push_back("nu estimate diverged toward the Gaussian limit (nu - 1 > 1e6); beta optimized with nu held there");
  if (!res.converged) fm.warnings.push_back("optimizer did not converge: " + res.message);
  fm.std_errors = standard_errors(fm);
  if (!fm.std_errors) fm.warnings.push_back("negative Hessian is not positive definite; standard errors omitted");
  return fm;
}

struct ProfileRow {
  double nu;
  std::optional<double> log_likelihood;  // empty when the cell failed
  bool converged = false;
  std::string error;
};

/// max over β of l(β; ν) on a grid of fixed ν values.
inline std::vector<ProfileRow> profile_nu(const Dataset& data, const KernelConfig& kernel, const FitOptions& opts,
                                          const std::vector<double>& grid) {
  std::vector<ProfileRow> rows(grid.size());
  parallel_for(static_cast<int>(grid.size()), opts.threads, [&](int i) {
    ProfileRow row{grid[static_cast<std::size_t>(i)], std::nullopt, false, {}};
    try {
      FitOptions o = opts;
      o.mode = FitMode::ETPR;
      o.nu_policy = NuPolicy::fixed(row.nu);
      o.threads = 1;
      const auto fm = fit(data, kernel, o);
      row.log_likelihood = fm.log_likelihood;
      row.converged = fm.converged;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows[static_cast<std::size_t>(i)] = row;
  });
  return rows;
}

}  // namespace etpr

#endif  // ETPR_ESTIMATE_HPP
