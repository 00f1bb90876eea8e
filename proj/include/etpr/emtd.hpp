#ifndef ETPR_EMTD_HPP
#define ETPR_EMTD_HPP

// Extended multivariate t-distribution EMTD(ν, ω, μ, Σ):
//
//   p(z) = |2πωΣ|^{-1/2} Γ(n/2+ν)/Γ(ν) (1 + (z-μ)ᵀΣ⁻¹(z-μ)/(2ω))^{-(n/2+ν)}
//
// equivalently the scale mixture z | r ~ N(μ, rΣ), r ~ IG(ν, ω).

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "etpr/errors.hpp"
#include "etpr/linalg.hpp"
#include "etpr/rng.hpp"
#include "etpr/special.hpp"

namespace etpr {

/// Inverse gamma law IG(shape, scale) with density
/// scale^shape / Γ(shape) r^{-shape-1} exp(-scale / r).
struct IgParams {
  double shape;
  double scale;

  IgParams(double shape_, double scale_) : shape(shape_), scale(scale_) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw InvalidParameter("inverse gamma parameters must be positive");
  }

  double log_density(double r) const {
    if (!(r > 0.0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(scale) - special::lgamma(shape) - (shape + 1.0) * std::log(r) - scale / r;
  }
  std::optional<double> mean() const {
    if (shape <= 1.0) return std::nullopt;
    return scale / (shape - 1.0);
  }
  std::optional<double> variance() const {
    if (shape <= 2.0) return std::nullopt;
    return scale * scale / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0));
  }
  template <typename Rng>
  double sample(Rng& rng) const {
    std::gamma_distribution<double> g(shape, 1.0);
    return scale / g(rng);
  }
};

class EmtdParams {
 public:
  EmtdParams(double nu, double omega, Vector mean, Matrix scale)
      : nu_(nu), omega_(omega), mean_(std::move(mean)), scale_(std::move(scale)) {
    if (!(nu_ > 0.0) || !std::isfinite(nu_)) throw InvalidParameter("EMTD shape nu must be positive and finite");
    if (!(omega_ > 0.0) || !std::isfinite(omega_)) throw InvalidParameter("EMTD scale omega must be positive and finite");
    if (scale_.rows() != scale_.cols()) throw DimensionError("EMTD scale matrix is not square");
    if (mean_.size() != scale_.rows())
      throw DimensionError("EMTD mean length " + std::to_string(mean_.size()) + " does not match scale dimension " +
                           std::to_string(scale_.rows()));
    const double amax = scale_.cwiseAbs().maxCoeff();
    if ((scale_ - scale_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * amax)
      throw InvalidParameter("EMTD scale matrix is not symmetric");
    chol_ = std::make_shared<const Cholesky>(scale_);
  }

  double nu() const { return nu_; }
  double omega() const { return omega_; }
  const Vector& mean() const { return mean_; }
  const Matrix& scale() const { return scale_; }
  Eigen::Index dim() const { return mean_.size(); }
  const Cholesky& cholesky() const { return *chol_; }

  /// (z-μ)ᵀΣ⁻¹(z-μ)
  double mahalanobis(const Vector& z) const {
    if (z.size() != dim())
      throw DimensionError("point has length " + std::to_string(z.size()) + ", distribution has dimension " +
                           std::to_string(dim()));
    return chol_->quad_form(z - mean_);
  }

  /// E(Z) = μ, defined for ν > 1/2.
  std::optional<Vector> expectation() const {
    if (nu_ <= 0.5) return std::nullopt;
    return mean_;
  }
  /// Cov(Z) = ωΣ/(ν−1), defined for ν > 1.
  std::optional<Matrix> covariance() const {
    if (nu_ <= 1.0) return std::nullopt;
    return omega_ * scale_ / (nu_ - 1.0);
  }
  /// Marginal skewness (0 by symmetry); exposed only when the third moment exists, ν > 3/2.
  std::optional<double> skewness() const {
    if (nu_ <= 1.5) return std::nullopt;
    return 0.0;
  }
  /// Marginal kurtosis 3/(ν−2) + 3, defined for ν > 2.
  std::optional<double> kurtosis() const {
    if (nu_ <= 2.0) return std::nullopt;
    return 3.0 / (nu_ - 2.0) + 3.0;
  }

 private:
  double nu_;
  double omega_;
  Vector mean_;
  Matrix scale_;
  std::shared_ptr<const Cholesky> chol_;
};

namespace detail {

// log density from n, log|Σ| and the Mahalanobis term q.
inline double emtd_log_density_from(double n, double nu, double omega, double log_det_scale, double q) {
  return -0.5 * (n * special::kLog2Pi + log_det_scale + n * std::log(omega)) + special::lgamma(0.5 * n + nu) -
         special::lgamma(nu) - (0.5 * n + nu) * std::log1p(q / (2.0 * omega));
}

}  // namespace detail

/// log p(z) of the EMTD, via Cholesky of Σ and log-gamma differences.
inline double emtd_log_density(const Vector& z, const EmtdParams& p) {
  return detail::emtd_log_density_from(static_cast<double>(p.dim()), p.nu(), p.omega(), p.cholesky().log_det(),
                                       p.mahalanobis(z));
}

namespace detail {

inline void check_indices(std::span<const int> idx, Eigen::Index n, const char* what) {
  if (idx.empty()) throw IndexError(std::string(what) + ": index set is empty");
  std::vector<int> sorted(idx.begin(), idx.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 0 || sorted.back() >= n)
    throw IndexError(std::string(what) + ": index out of range [0, " + std::to_string(n) + ")");
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw IndexError(std::string(what) + ": duplicate index");
}

inline Vector select(const Vector& v, std::span<const int> idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

inline Matrix select(const Matrix& a, std::span<const int> rows, std::span<const int> cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(rows[i], cols[j]);
  return out;
}

inline std::vector<int> complement(std::span<const int> idx, Eigen::Index n) {
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  for (int i : idx) taken[static_cast<std::size_t>(i)] = true;
  std::vector<int> out;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!taken[static_cast<std::size_t>(i)]) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace detail

/// Law of the sub-vector Z_indices: same (ν, ω), sub-mean, principal sub-matrix.
inline EmtdParams emtd_marginal(const EmtdParams& p, std::span<const int> indices) {
  detail::check_indices(indices, p.dim(), "emtd_marginal");
  return EmtdParams(p.nu(), p.omega(), detail::select(p.mean(), indices),
                    detail::select(p.scale(), indices, indices));
}

/// Law of the remaining coordinates (ascending index order) given
/// Z_observed = z1: EMTD(ν + n₁/2, ω + n₁/2, μ*, Σ*) with
/// μ* = Σ₂₁Σ₁₁⁻¹(z₁−μ₁) + μ₂ and Σ* = (2ω + a₁) Σ₂₂·₁ / (2ω + n₁).
inline EmtdParams emtd_conditional(const EmtdParams& p, std::span<const int> observed, const Vector& z1) {
  detail::check_indices(observed, p.dim(), "emtd_conditional");
  if (static_cast<std::size_t>(z1.size()) != observed.size())
    throw DimensionError("conditioning value length does not match observed index count");
  const std::vector<int> rest = detail::complement(observed, p.dim());
  if (rest.empty()) throw IndexError("emtd_conditional: no coordinates left to condition");

  const Matrix s11 = detail::select(p.scale(), observed, observed);
  const Matrix s12 = detail::select(p.scale(), observed, rest);
  const Matrix s22 = detail::select(p.scale(), rest, rest);
  const Cholesky c11(s11);
  const Vector d1 = z1 - detail::select(p.mean(), observed);
  const Vector w = c11.solve(d1);
  const double a1 = d1.dot(w);
  const double n1 = static_cast<double>(observed.size());

  Vector mu = s12.transpose() * w + detail::select(p.mean(), rest);
  Matrix schur = s22 - s12.transpose() * c11.solve(s12);
  symmetrize_from_upper(schur);
  Matrix scale = ((2.0 * p.omega() + a1) / (2.0 * p.omega() + n1)) * schur;
  return EmtdParams(p.nu() + 0.5 * n1, p.omega() + 0.5 * n1, std::move(mu), std::move(scale));
}

/// AZ ~ EMTD(ν, ω, Aμ, AΣAᵀ) for A of full row rank.
inline EmtdParams emtd_linear_map(const EmtdParams& p, const Matrix& a) {
  if (a.cols() != p.dim()) throw DimensionError("linear map column count does not match distribution dimension");
  if (a.rows() == 0 || a.rows() > a.cols()) throw RankError("linear map must have 1 <= rows <= dimension");
  Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
  qr.setThreshold(1e-10);
  if (qr.rank() != a.rows()) throw RankError("linear map is not of full row rank");
  Matrix s = a * p.scale() * a.transpose();
  symmetrize_from_upper(s);
  return EmtdParams(p.nu(), p.omega(), a * p.mean(), std::move(s));
}

/// `count` i.i.d. draws (rows) via r ~ IG(ν, ω), z | r ~ N(μ, rΣ).
/// Row i uses its own counter stream `i` under `seed`, so output is a pure
/// function of (p, seed) and row i does not depend on `count`.
inline Matrix emtd_sample(const EmtdParams& p, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidParameter("sample count must be at least 1");
  const Matrix l = p.cholesky().lower();
  const IgParams ig(p.nu(), p.omega());
  const Eigen::Index n = p.dim();
  Matrix out(count, n);
  Vector e(n);
  for (int i = 0; i < count; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const double r = ig.sample(rng);
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < n; ++j) e(j) = normal(rng);
    out.row(i) = (p.mean() + std::sqrt(r) * (l * e)).transpose();
  }
  return out;
}

struct RPosterior {
  IgParams law;                   // IG(n/2 + ν, ω + q/2)
  std::optional<double> mean;     // (2ω + q)/(n + 2ν − 2), needs n + 2ν > 2
  std::optional<double> variance; // needs n/2 + ν > 2
};

/// Posterior of the latent scale r given Z = z.
inline RPosterior r_posterior(const EmtdParams& p, const Vector& z) {
  const double n = static_cast<double>(p.dim());
  const double q = p.mahalanobis(z);
  RPosterior out{IgParams(0.5 * n + p.nu(), p.omega() + 0.5 * q), std::nullopt, std::nullopt};
  const double denom = n + 2.0 * p.nu() - 2.0;
  if (denom > 0.0) out.mean = (2.0 * p.omega() + q) / denom;
  if (0.5 * n + p.nu() > 2.0) {
    const double num = 2.0 * p.omega() + q;
    out.variance = num * num / (denom * denom * (0.5 * n + p.nu() - 2.0));
  }
  return out;
}

}  // namespace etpr

#endif  // ETPR_EMTD_HPP
