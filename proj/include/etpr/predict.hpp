#ifndef ETPR_PREDICT_HPP
#define ETPR_PREDICT_HPP

// Predictive law of f_i(u) given the training data:
//   EMTD(ν*, ω*, μ*, σ*),  ν* = n/2 + ν,  ω* = ν* − 1,
//   μ* = k_uᵀ Σ⁻¹ y,       σ* = s₀ (k(u,u) − k_uᵀ Σ⁻¹ k_u).
// Intervals use (f − μ*) / sqrt(σ* ω*/ν*) ~ t_{2ν*}; Gaussian mode uses N(0,1).

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "etpr/errors.hpp"
#include "etpr/model.hpp"
#include "etpr/special.hpp"

namespace etpr {

struct Prediction {
  double mean = 0.0;
  double f_variance = 0.0;
  double y_variance = 0.0;
  double s0 = 1.0;
  double dof = kNuInfinity;  // 2ν* = n + 2ν; +inf in Gaussian mode
  double lower = 0.0;
  double upper = 0.0;
};

namespace detail {

inline const CurveCache& checked_cache(const Model& model, int curve) {
  if (curve < 0 || curve >= model.data.size())
    throw IndexError("curve index " + std::to_string(curve) + " is not a training curve");
  return model.caches[static_cast<std::size_t>(curve)];
}

inline double clamp_variance(double v) {
  if (v >= 0.0) return v;
  if (v >= -1e-10) return 0.0;
  throw NumericalError("predictive variance is negative beyond round-off: " + std::to_string(v));
}

// Half-width multiplier: quantile · sqrt(ω*/ν*) (1 in Gaussian mode).
inline double interval_factor(const Model& model, int n, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidOptions("interval level must lie in (0, 1)");
  const double p = 0.5 * (1.0 + level);
  if (model.params.is_gpr()) return special::student_t_quantile(kNuInfinity, p);
  const double nu_star = 0.5 * n + model.params.nu();
  return special::student_t_quantile(2.0 * nu_star, p) * std::sqrt((nu_star - 1.0) / nu_star);
}

inline std::vector<Prediction> predict_impl(const Model& model, int curve, const Matrix& u, double level, bool for_y) {
  const auto& c = checked_cache(model, curve);
  const auto& kernel = model.params.kernel_for(curve);
  const auto& x = model.data.curves[static_cast<std::size_t>(curve)].x;
  if (u.cols() != model.data.input_dim) throw DimensionError("query points have wrong number of columns");
  const double factor = interval_factor(model, c.n, level);
  const double dof = model.params.is_gpr() ? kNuInfinity : c.n + 2.0 * model.params.nu();
  const double phi = model.params.phi();
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(u.rows()));
  if (u.rows() == 0) return out;
  const Matrix ku = cross_gram(kernel, u, x);  // q × n
  const Matrix v = c.sigma_chol.llt().matrixL().solve(ku.transpose());
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    Prediction p;
    p.mean = ku.row(r).dot(c.alpha);
    const double kuu = kernel_eval(kernel, u.row(r).transpose(), u.row(r).transpose());
    p.f_variance = clamp_variance(c.s0 * (kuu - v.col(r).squaredNorm()));
    p.y_variance = p.f_variance + c.s0 * phi;
    p.s0 = c.s0;
    p.dof = dof;
    const double half = factor * std::sqrt(for_y ? p.y_variance : p.f_variance);
    p.lower = p.mean - half;
    p.upper = p.mean + half;
    out.push_back(p);
  }
  return out;
}

}  // namespace detail

/// Predictions of f_curve at the rows of U; interval on f.
inline std::vector<Prediction> predict_f(const Model& model, int curve, const Matrix& u, double level = 0.95) {
  return detail::predict_impl(model, curve, u, level, false);
}

/// Predictions of y_curve at the rows of U (variance adds s₀φ); interval on y.
inline std::vector<Prediction> predict_y(const Model& model, int curve, const Matrix& u, double level = 0.95) {
  return detail::predict_impl(model, curve, u, level, true);
}

/// μ = K Σ⁻¹ y and C = s₀ φ K Σ⁻¹ at the training inputs.
inline std::pair<Vector, Matrix> blup_training(const Model& model, int curve) {
  const auto& c = detail::checked_cache(model, curve);
  const Matrix k = gram(model.params.kernel_for(curve), model.data.curves[static_cast<std::size_t>(curve)].x);
  Vector mu = k * c.alpha;
  Matrix cov = (c.s0 * model.params.phi()) * c.sigma_chol.solve(k).transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {std::move(mu), std::move(cov)};
}

/// k*(u, v) = s₀ (k(u, v) − k_uᵀ Σ⁻¹ k_v) on U × V.
inline Matrix posterior_process(const Model& model, int curve, const Matrix& u, const Matrix& v) {
  const auto& c = detail::checked_cache(model, curve);
  const auto& kernel = model.params.kernel_for(curve);
  const auto& x = model.data.curves[static_cast<std::size_t>(curve)].x;
  const Matrix a = c.sigma_chol.llt().matrixL().solve(cross_gram(kernel, u, x).transpose());
  const Matrix b = c.sigma_chol.llt().matrixL().solve(cross_gram(kernel, v, x).transpose());
  return c.s0 * (cross_gram(kernel, u, v) - a.transpose() * b);
}

}  // namespace etpr

#endif  // ETPR_PREDICT_HPP
