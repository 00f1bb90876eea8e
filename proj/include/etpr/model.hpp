#ifndef ETPR_MODEL_HPP
#define ETPR_MODEL_HPP

// Marginal likelihood of the extended t-process regression model
//
//   y_i | X_i ~ EMTD(ν, ν−1, 0, Σ_i),   Σ_i = K_i + φI,   i = 1..m,
//
// its analytic derivatives in β = (φ, θ) and ν, and the Gaussian (ν = ∞) case.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etpr/emtd.hpp"
#include "etpr/errors.hpp"
#include "etpr/kernels.hpp"
#include "etpr/linalg.hpp"
#include "etpr/special.hpp"

namespace etpr {

struct Curve {
  Matrix x;  // n_i × p
  Vector y;  // n_i
};

struct Dataset {
  std::vector<Curve> curves;
  int input_dim = 1;

  int size() const { return static_cast<int>(curves.size()); }
  int total_points() const {
    int s = 0;
    for (const auto& c : curves) s += static_cast<int>(c.y.size());
    return s;
  }

  void validate() const {
    if (curves.empty()) throw DimensionError("dataset has no curves");
    if (input_dim < 1) throw DimensionError("dataset input dimension must be at least 1");
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const auto& c = curves[i];
      if (c.y.size() < 1) throw DimensionError("curve " + std::to_string(i) + " has no observations");
      if (c.x.rows() != c.y.size()) throw DimensionError("curve " + std::to_string(i) + ": X rows do not match y length");
      if (c.x.cols() != input_dim) throw DimensionError("curve " + std::to_string(i) + ": X has wrong number of columns");
      if (!c.x.allFinite() || !c.y.allFinite())
        throw DimensionError("curve " + std::to_string(i) + " contains non-finite values");
    }
  }
};

inline constexpr double kNuInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kNuLowerBound = 1.0 + 1e-6;

/// β = (φ, θ) plus ν. ν = +inf selects the Gaussian process model; ω = ν − 1
/// is always derived. `kernels` has one entry when θ is tied across curves
/// and m entries otherwise.
class ModelParams {
 public:
  ModelParams(double phi, std::vector<KernelConfig> kernels, double nu)
      : phi_(phi), kernels_(std::move(kernels)), nu_(nu) {
    if (!(phi_ > 0.0) || !std::isfinite(phi_)) throw InvalidParameter("noise scale phi must be positive and finite");
    if (kernels_.empty()) throw InvalidParameter("model needs a kernel");
    if (std::isnan(nu_) || (std::isfinite(nu_) && !(nu_ >= kNuLowerBound)))
      throw NuOutOfDomain("nu must exceed 1 + 1e-6 (omega = nu - 1 must be positive)");
    for (const auto& k : kernels_)
      if (k.input_dim() != kernels_.front().input_dim()) throw InvalidParameter("kernels disagree on input dimension");
  }

  ModelParams(double phi, KernelConfig kernel, double nu)
      : ModelParams(phi, std::vector<KernelConfig>{std::move(kernel)}, nu) {}

  double phi() const { return phi_; }
  double nu() const { return nu_; }
  bool is_gpr() const { return std::isinf(nu_); }
  /// ω = ν − 1 (infinite in Gaussian mode).
  double omega() const { return nu_ - 1.0; }
  bool tied() const { return kernels_.size() == 1; }
  const std::vector<KernelConfig>& kernels() const { return kernels_; }
  const KernelConfig& kernel_for(int curve) const {
    return tied() ? kernels_.front() : kernels_.at(static_cast<std::size_t>(curve));
  }

  /// Length of β = 1 + Σ kernel parameter counts.
  int beta_size() const {
    int s = 1;
    for (const auto& k : kernels_) s += k.param_count();
    return s;
  }
  /// Offset of curve i's kernel block within β.
  int kernel_offset(int curve) const {
    if (tied()) return 1;
    int off = 1;
    for (int j = 0; j < curve; ++j) off += kernels_[static_cast<std::size_t>(j)].param_count();
    return off;
  }

  Vector beta() const {
    Vector b(beta_size());
    b(0) = phi_;
    int k = 1;
    for (const auto& kc : kernels_)
      for (double v : kc.params()) b(k++) = v;
    return b;
  }

  ModelParams with_beta(const Vector& beta) const {
    if (beta.size() != beta_size()) throw DimensionError("beta has wrong length");
    std::vector<KernelConfig> ks;
    int k = 1;
    for (const auto& kc : kernels_) {
      const int np = kc.param_count();
      ks.push_back(kc.with_params(std::span<const double>(beta.data() + k, static_cast<std::size_t>(np))));
      k += np;
    }
    return ModelParams(beta(0), std::move(ks), nu_);
  }

  ModelParams with_nu(double nu) const { return ModelParams(phi_, kernels_, nu); }
  ModelParams as_gpr() const { return with_nu(kNuInfinity); }

  std::vector<std::string> beta_names() const {
    std::vector<std::string> out{"phi"};
    for (std::size_t i = 0; i < kernels_.size(); ++i)
      for (auto& n : kernels_[i].param_names()) out.push_back(tied() ? n : "curve" + std::to_string(i) + "." + n);
    return out;
  }

 private:
  double phi_;
  std::vector<KernelConfig> kernels_;
  double nu_;
};

/// Per-curve quantities shared by likelihood, scores and prediction.
struct CurveCache {
  Cholesky sigma_chol;  // Σ_i = K_i + φI
  Vector alpha;         // Σ_i⁻¹ y_i
  double quad = 0.0;    // S_i = y_iᵀ Σ_i⁻¹ y_i
  double s1 = 1.0;      // (n + 2ν) / (2(ν−1) + S_i); 1 in Gaussian mode
  double s0 = 1.0;      // (S_i + 2(ν−1)) / (n + 2(ν−1)); 1 in Gaussian mode
  int n = 0;
};

inline Matrix sigma_matrix(const KernelConfig& kernel, const Matrix& x, double phi) {
  Matrix s = gram(kernel, x);
  s.diagonal().array() += phi;
  return s;
}

inline CurveCache make_curve_cache(const Curve& c, const KernelConfig& kernel, double phi, double nu, int curve_index = -1) {
  CurveCache cc;
  try {
    cc.sigma_chol = Cholesky(sigma_matrix(kernel, c.x, phi));
  } catch (const SingularScale& e) {
    throw SingularScale(e.what(), curve_index);
  }
  cc.n = static_cast<int>(c.y.size());
  cc.alpha = cc.sigma_chol.solve(c.y);
  cc.quad = cc.sigma_chol.quad_form(c.y);
  if (std::isfinite(nu)) {
    const double n = static_cast<double>(cc.n);
    cc.s1 = (n + 2.0 * nu) / (2.0 * (nu - 1.0) + cc.quad);
    cc.s0 = (cc.quad + 2.0 * (nu - 1.0)) / (n + 2.0 * (nu - 1.0));
  }
  return cc;
}

inline std::vector<CurveCache> make_caches(const Dataset& data, const ModelParams& params) {
  data.validate();
  if (!params.tied() && static_cast<int>(params.kernels().size()) != data.size())
    throw DimensionError("untied model needs one kernel per curve");
  std::vector<CurveCache> out;
  out.reserve(data.curves.size());
  for (int i = 0; i < data.size(); ++i)
    out.push_back(make_curve_cache(data.curves[static_cast<std::size_t>(i)], params.kernel_for(i), params.phi(),
                                   params.nu(), i));
  return out;
}

namespace detail {

inline double curve_log_likelihood(const CurveCache& c, double nu) {
  const double n = static_cast<double>(c.n);
  if (std::isinf(nu)) return -0.5 * (n * special::kLog2Pi + c.sigma_chol.log_det() + c.quad);
  return emtd_log_density_from(n, nu, nu - 1.0, c.sigma_chol.log_det(), c.quad);
}

}  // namespace detail

/// l(β; ν) = Σ_i log p(y_i | X_i).
inline double log_marginal_likelihood(const Dataset& data, const ModelParams& params) {
  const auto caches = make_caches(data, params);
  double l = 0.0;
  for (const auto& c : caches) l += detail::curve_log_likelihood(c, params.nu());
  return l;
}

inline double log_marginal_likelihood(const std::vector<CurveCache>& caches, double nu) {
  double l = 0.0;
  for (const auto& c : caches) l += detail::curve_log_likelihood(c, nu);
  return l;
}

/// ∂l/∂β_k = ½ Σ_i tr((s_{1i} α_i α_iᵀ − Σ_i⁻¹) ∂Σ_i/∂β_k), natural scale.
inline Vector score_beta(const Dataset& data, const ModelParams& params, const std::vector<CurveCache>& caches) {
  Vector g = Vector::Zero(params.beta_size());
  for (int i = 0; i < data.size(); ++i) {
    const auto& c = caches[static_cast<std::size_t>(i)];
    const auto& kernel = params.kernel_for(i);
    const Matrix sinv = c.sigma_chol.inverse();
    // φ: ∂Σ/∂φ = I
    g(0) += 0.5 * (c.s1 * c.alpha.squaredNorm() - sinv.trace());
    const auto grads = gram_grads(kernel, data.curves[static_cast<std::size_t>(i)].x);
    const int off = params.kernel_offset(i);
    for (std::size_t a = 0; a < grads.size(); ++a) {
      const Matrix& d = grads[a];
      g(off + static_cast<int>(a)) += 0.5 * (c.s1 * c.alpha.dot(d * c.alpha) - sinv.cwiseProduct(d).sum());
    }
  }
  return g;
}

inline Vector score_beta(const Dataset& data, const ModelParams& params) {
  return score_beta(data, params, make_caches(data, params));
}

/// Gradient of l with respect to log β (β ⊙ ∂l/∂β).
inline Vector score_log_beta(const Dataset& data, const ModelParams& params, const std::vector<CurveCache>& caches) {
  return score_beta(data, params, caches).cwiseProduct(params.beta());
}

/// ∂l/∂ν; only defined for finite ν > 1.
inline double score_nu(const std::vector<CurveCache>& caches, double nu) {
  if (!std::isfinite(nu) || !(nu > 1.0)) throw NuOutOfDomain("score in nu requires finite nu > 1");
  const double w = nu - 1.0;
  double s = 0.0;
  for (const auto& c : caches) {
    const double n = static_cast<double>(c.n);
    const double q = c.quad;
    s += n / w + 2.0 * std::log1p(q / (2.0 * w)) - (n + 2.0 * nu) * q / (2.0 * w * w + w * q) -
         2.0 * special::digamma(0.5 * n + nu) + 2.0 * special::digamma(nu);
  }
  return -0.5 * s;
}

inline double score_nu(const Dataset& data, const ModelParams& params) {
  if (params.is_gpr()) throw NuOutOfDomain("score in nu requires finite nu > 1");
  return score_nu(make_caches(data, params), params.nu());
}

/// Full matrix ∂²l/∂β∂βᵀ (natural scale), all (k, k') pairs.
inline Matrix hessian_beta(const Dataset& data, const ModelParams& params, const std::vector<CurveCache>& caches) {
  const int nb = params.beta_size();
  Matrix h = Matrix::Zero(nb, nb);
  const bool gauss = params.is_gpr();
  for (int i = 0; i < data.size(); ++i) {
    const auto& c = caches[static_cast<std::size_t>(i)];
    const auto& x = data.curves[static_cast<std::size_t>(i)].x;
    const auto& kernel = params.kernel_for(i);
    const Eigen::Index n = c.n;
    const int off = params.kernel_offset(i);
    const int np = kernel.param_count();

    // Local parameter list: 0 = φ, 1..np = this curve's θ.
    std::vector<Matrix> d1;
    d1.reserve(static_cast<std::size_t>(np) + 1);
    d1.push_back(Matrix::Identity(n, n));
    for (auto& g : gram_grads(kernel, x)) d1.push_back(std::move(g));
    const auto d2 = gram_hessians(kernel, x);

    const Matrix sinv = c.sigma_chol.inverse();
    std::vector<Matrix> sinv_d(d1.size());
    std::vector<Vector> d_alpha(d1.size());
    Vector a_d_a(static_cast<Eigen::Index>(d1.size()));
    for (std::size_t a = 0; a < d1.size(); ++a) {
      sinv_d[a] = sinv * d1[a];
      d_alpha[a] = d1[a] * c.alpha;
      a_d_a(static_cast<Eigen::Index>(a)) = c.alpha.dot(d_alpha[a]);
    }
    const double nn = static_cast<double>(n);
    const double curv = gauss ? 0.0 : c.s1 * c.s1 / (nn + 2.0 * params.nu());
    auto global = [&](int a) { return a == 0 ? 0 : off + a - 1; };
    const int L = np + 1;
    for (int a = 0; a < L; ++a)
      for (int b = a; b < L; ++b) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        double v = 0.5 * sinv_d[ua].cwiseProduct(sinv_d[ub].transpose()).sum();
        if (a > 0 && b > 0) {
          const Matrix& dd = d2[static_cast<std::size_t>((a - 1) * np + (b - 1))];
          v += -0.5 * sinv.cwiseProduct(dd).sum() + 0.5 * c.s1 * c.alpha.dot(dd * c.alpha);
        }
        v += 0.5 * curv * a_d_a(a) * a_d_a(b);
        v -= c.s1 * d_alpha[ua].dot(sinv * d_alpha[ub]);
        const int ga = global(a), gb = global(b);
        h(ga, gb) += v;
        if (ga != gb) h(gb, ga) += v;
      }
  }
  return h;
}

inline Matrix hessian_beta(const Dataset& data, const ModelParams& params) {
  return hessian_beta(data, params, make_caches(data, params));
}

/// Data, parameters and per-curve caches at fixed (β, ν).
struct Model {
  Dataset data;
  ModelParams params;
  std::vector<CurveCache> caches;

  static Model make(Dataset d, ModelParams p) {
    auto c = make_caches(d, p);
    return Model{std::move(d), std::move(p), std::move(c)};
  }
  double log_likelihood() const { return log_marginal_likelihood(caches, params.nu()); }
};

struct InfluenceRow {
  double magnitude;
  double etpr_score_norm;
  double gpr_score_norm;
  double s1;  // eTPR weight of the perturbed curve
};

/// Replaces y at (curve, point) by each magnitude and reports the Euclidean
/// norms of the eTPR and Gaussian score vectors at fixed β.
inline std::vector<InfluenceRow> bounded_influence_probe(const Dataset& data, const ModelParams& params, int curve,
                                                         int point, std::span<const double> magnitudes) {
  if (params.is_gpr()) throw InvalidParameter("influence probe needs finite nu for the eTPR column");
  for (const auto& k : params.kernels())
    if (!k.is_bounded()) throw InvalidParameter("influence probe requires bounded kernels (no LIN term)");
  if (curve < 0 || curve >= data.size()) throw IndexError("curve index out of range");
  if (point < 0 || point >= data.curves[static_cast<std::size_t>(curve)].y.size())
    throw IndexError("point index out of range");
  const ModelParams gpr = params.as_gpr();
  std::vector<InfluenceRow> rows;
  rows.reserve(magnitudes.size());
  for (double mag : magnitudes) {
    Dataset d = data;
    d.curves[static_cast<std::size_t>(curve)].y(point) = mag;
    const auto ce = make_caches(d, params);
    const auto cg = make_caches(d, gpr);
    rows.push_back({mag, score_beta(d, params, ce).norm(), score_beta(d, gpr, cg).norm(),
                    ce[static_cast<std::size_t>(curve)].s1});
  }
  return rows;
}

}  // namespace etpr

#endif  // ETPR_MODEL_HPP
