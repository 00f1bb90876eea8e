#ifndef ETPR_KERNELS_HPP
#define ETPR_KERNELS_HPP

// Covariance kernels and their analytic hyperparameter derivatives.
//
//   SE      η₀ exp(−½ Σ_l η_l (u_l − v_l)²)                params (η₀, η₁..η_p)
//   LIN     Σ_l η_{l−1} u_l v_l                             params (η₀..η_{p−1})
//   VM      η₀ exp(η₁ (Σ_l cos(u_l − v_l) − p))             params (η₀, η₁)
//   RQ      (1 + (20^{1/λ} − 1) Σ_l η_l (u_l − v_l)²)^{−λ}  params (λ, η₁..η_p)
//   MATERN  (η₁d)^α K_α(η₁d) / (Γ(α) 2^{α−1}), d = ‖u − v‖  params (η₁), α fixed
//
// Parameters are held on the natural scale; all of them are strictly positive.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "etpr/errors.hpp"
#include "etpr/linalg.hpp"
#include "etpr/special.hpp"

namespace etpr {

enum class KernelFamily { SE, LIN, VM, RQ, MATERN };

inline std::string_view family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::SE: return "SE";
    case KernelFamily::LIN: return "LIN";
    case KernelFamily::VM: return "VM";
    case KernelFamily::RQ: return "RQ";
    case KernelFamily::MATERN: return "MATERN";
  }
  return "?";
}

inline std::optional<KernelFamily> parse_family(std::string_view s) {
  for (auto f : {KernelFamily::SE, KernelFamily::LIN, KernelFamily::VM, KernelFamily::RQ, KernelFamily::MATERN})
    if (family_name(f) == s) return f;
  return std::nullopt;
}

inline int family_param_count(KernelFamily f, int p) {
  switch (f) {
    case KernelFamily::SE: return p + 1;
    case KernelFamily::LIN: return p;
    case KernelFamily::VM: return 2;
    case KernelFamily::RQ: return p + 1;
    case KernelFamily::MATERN: return 1;
  }
  return 0;
}

/// SE, VM, RQ and MATERN are bounded in (u, v); LIN is not.
inline bool family_is_bounded(KernelFamily f) { return f != KernelFamily::LIN; }

struct KernelTerm {
  KernelFamily family;
  std::vector<double> params;
  double matern_order = 1.5;  // used by MATERN only

  /// Indices (within `params`) of parameters that enter linearly as amplitudes.
  std::vector<int> amplitude_indices() const {
    switch (family) {
      case KernelFamily::SE:
      case KernelFamily::VM: return {0};
      case KernelFamily::LIN: {
        std::vector<int> out(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) out[i] = static_cast<int>(i);
        return out;
      }
      default: return {};
    }
  }
};

class KernelConfig {
 public:
  KernelConfig(std::vector<KernelTerm> terms, int input_dim) : terms_(std::move(terms)), input_dim_(input_dim) {
    if (input_dim_ < 1) throw InvalidParameter("kernel input dimension must be at least 1");
    if (terms_.empty()) throw InvalidParameter("kernel needs at least one term");
    for (const auto& t : terms_) {
      const int want = family_param_count(t.family, input_dim_);
      if (static_cast<int>(t.params.size()) != want)
        throw InvalidParameter(std::string(family_name(t.family)) + " term expects " + std::to_string(want) +
                               " parameters, got " + std::to_string(t.params.size()));
      for (double v : t.params)
        if (!(v > 0.0) || !std::isfinite(v))
          throw InvalidParameter(std::string(family_name(t.family)) + " parameters must be positive and finite");
      if (t.family == KernelFamily::MATERN && !(t.matern_order > 0.0))
        throw InvalidParameter("Matern order must be positive");
    }
  }

  /// Default starting values: unit amplitudes and unit rates; λ = 1.
  static KernelConfig with_defaults(std::span<const KernelFamily> families, int input_dim, double matern_order = 1.5) {
    std::vector<KernelTerm> terms;
    for (auto f : families) {
      KernelTerm t{f, std::vector<double>(static_cast<std::size_t>(family_param_count(f, input_dim)), 1.0),
                   matern_order};
      terms.push_back(std::move(t));
    }
    return KernelConfig(std::move(terms), input_dim);
  }

  const std::vector<KernelTerm>& terms() const { return terms_; }
  int input_dim() const { return input_dim_; }

  int param_count() const {
    int c = 0;
    for (const auto& t : terms_) c += static_cast<int>(t.params.size());
    return c;
  }

  /// All hyperparameters, concatenated in term order.
  std::vector<double> params() const {
    std::vector<double> out;
    for (const auto& t : terms_) out.insert(out.end(), t.params.begin(), t.params.end());
    return out;
  }

  KernelConfig with_params(std::span<const double> values) const {
    if (static_cast<int>(values.size()) != param_count()) throw DimensionError("kernel parameter vector has wrong length");
    std::vector<KernelTerm> terms = terms_;
    std::size_t k = 0;
    for (auto& t : terms)
      for (auto& v : t.params) v = values[k++];
    return KernelConfig(std::move(terms), input_dim_);
  }

  bool is_bounded() const {
    for (const auto& t : terms_)
      if (!family_is_bounded(t.family)) return false;
    return true;
  }

  /// Flat indices of amplitude parameters (SE η₀, VM η₀, every LIN η).
  std::vector<int> amplitude_indices() const {
    std::vector<int> out;
    int offset = 0;
    for (const auto& t : terms_) {
      for (int i : t.amplitude_indices()) out.push_back(offset + i);
      offset += static_cast<int>(t.params.size());
    }
    return out;
  }

  /// True when every term is linear in its amplitude parameters, so that
  /// scaling all amplitudes by c scales the kernel by c.
  bool is_amplitude_homogeneous() const {
    for (const auto& t : terms_)
      if (t.family == KernelFamily::RQ || t.family == KernelFamily::MATERN) return false;
    return true;
  }

  std::vector<std::string> param_names() const {
    std::vector<std::string> out;
    for (std::size_t ti = 0; ti < terms_.size(); ++ti) {
      const auto& t = terms_[ti];
      const std::string prefix = std::string(family_name(t.family)) + "[" + std::to_string(ti) + "].";
      for (std::size_t i = 0; i < t.params.size(); ++i) {
        std::string name;
        switch (t.family) {
          case KernelFamily::SE:
          case KernelFamily::LIN:
          case KernelFamily::VM: name = "eta" + std::to_string(i); break;
          case KernelFamily::RQ: name = i == 0 ? "lambda" : "eta" + std::to_string(i); break;
          case KernelFamily::MATERN: name = "eta1"; break;
        }
        out.push_back(prefix + name);
      }
    }
    return out;
  }

 private:
  std::vector<KernelTerm> terms_;
  int input_dim_;
};

namespace detail {

inline void check_points(const KernelConfig& cfg, const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  if (u.size() != cfg.input_dim() || v.size() != cfg.input_dim())
    throw DimensionError("kernel input has wrong dimension");
}

inline double matern_norm(double order) {
  return 1.0 / (std::exp(special::lgamma(order)) * std::pow(2.0, order - 1.0));
}

// x^a K_b(x) for x > 0.
inline double xpow_bessel(double a, double b, double x) { return std::pow(x, a) * special::bessel_k(std::abs(b), x); }

inline double term_eval(const KernelTerm& t, const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  const auto& th = t.params;
  const Eigen::Index p = u.size();
  switch (t.family) {
    case KernelFamily::SE: {
      double s = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        const double d = u(l) - v(l);
        s += th[static_cast<std::size_t>(l) + 1] * d * d;
      }
      return th[0] * std::exp(-0.5 * s);
    }
    case KernelFamily::LIN: {
      double s = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) s += th[static_cast<std::size_t>(l)] * u(l) * v(l);
      return s;
    }
    case KernelFamily::VM: {
      double c = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) c += std::cos(u(l) - v(l));
      return th[0] * std::exp(th[1] * (c - static_cast<double>(p)));
    }
    case KernelFamily::RQ: {
      const double lam = th[0];
      double s = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        const double d = u(l) - v(l);
        s += th[static_cast<std::size_t>(l) + 1] * d * d;
      }
      const double c = std::expm1(std::log(20.0) / lam);
      return std::pow(1.0 + c * s, -lam);
    }
    case KernelFamily::MATERN: {
      const double d = (u - v).norm();
      if (d == 0.0) return 1.0;
      const double x = th[0] * d;
      if (t.matern_order == 1.5) return (1.0 + x) * std::exp(-x);
      return matern_norm(t.matern_order) * xpow_bessel(t.matern_order, t.matern_order, x);
    }
  }
  return 0.0;
}

// Writes ∂k/∂θ for the term's parameters into out[0..np).
inline void term_grad(const KernelTerm& t, const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v,
                      std::span<double> out) {
  const auto& th = t.params;
  const Eigen::Index p = u.size();
  switch (t.family) {
    case KernelFamily::SE: {
      double s = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        const double d = u(l) - v(l);
        s += th[static_cast<std::size_t>(l) + 1] * d * d;
      }
      const double e = std::exp(-0.5 * s);
      out[0] = e;
      for (Eigen::Index l = 0; l < p; ++l) {
        const double d = u(l) - v(l);
        out[static_cast<std::size_t>(l) + 1] = -0.5 * d * d * th[0] * e;
      }
      return;
    }
    case KernelFamily::LIN:
      for (Eigen::Index l = 0; l < p; ++l) out[static_cast<std::size_t>(l)] = u(l) * v(l);
      return;
    case KernelFamily::VM: {
      double c = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) c += std::cos(u(l) - v(l));
      c -= static_cast<double>(p);
      const double e = std::exp(th[1] * c);
      out[0] = e;
      out[1] = th[0] * c * e;
      return;
    }
    case KernelFamily::RQ: {
      const double lam = th[0];
      double s = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        const double d = u(l) - v(l);
        s += th[static_cast<std::size_t>(l) + 1] * d * d;
      }
      const double ln20 = std::log(20.0);
      const double c = std::expm1(ln20 / lam);
      const double dc = -ln20 * std::exp(ln20 / lam) / (lam * lam);
      const double g = 1.0 + c * s;
      const double k = std::pow(g, -lam);
      out[0] = k * (-std::log(g) - lam * dc * s / g);
      const double common = -lam * c * std::pow(g, -lam - 1.0);
      for (Eigen::Index l = 0; l < p; ++l) {
        const double d = u(l) - v(l);
        out[static_cast<std::size_t>(l) + 1] = common * d * d;
      }
      return;
    }
    case KernelFamily::MATERN: {
      const double d = (u - v).norm();
      if (d == 0.0) {
        out[0] = 0.0;
        return;
      }
      const double x = th[0] * d;
      if (t.matern_order == 1.5) {
        out[0] = -th[0] * d * d * std::exp(-x);
        return;
      }
      // d/dx [x^α K_α(x)] = −x^α K_{α−1}(x)
      out[0] = -matern_norm(t.matern_order) * xpow_bessel(t.matern_order, t.matern_order - 1.0, x) * d;
      return;
    }
  }
}

// Writes ∂²k/∂θ_a∂θ_b (np × np, row-major) for the term's parameters.
inline void term_hess(const KernelTerm& t, const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v,
                      Eigen::Ref<Matrix> out) {
  const auto& th = t.params;
  const Eigen::Index p = u.size();
  out.setZero();
  switch (t.family) {
    case KernelFamily::SE: {
      Vector d2(p);
      double s = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        const double d = u(l) - v(l);
        d2(l) = d * d;
        s += th[static_cast<std::size_t>(l) + 1] * d2(l);
      }
      const double e = std::exp(-0.5 * s);
      for (Eigen::Index l = 0; l < p; ++l) {
        out(0, l + 1) = out(l + 1, 0) = -0.5 * d2(l) * e;
        for (Eigen::Index m = 0; m < p; ++m) out(l + 1, m + 1) = 0.25 * d2(l) * d2(m) * th[0] * e;
      }
      return;
    }
    case KernelFamily::LIN: return;
    case KernelFamily::VM: {
      double c = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) c += std::cos(u(l) - v(l));
      c -= static_cast<double>(p);
      const double e = std::exp(th[1] * c);
      out(0, 1) = out(1, 0) = c * e;
      out(1, 1) = th[0] * c * c * e;
      return;
    }
    case KernelFamily::RQ: {
      const double lam = th[0];
      Vector d2(p);
      double s = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        const double d = u(l) - v(l);
        d2(l) = d * d;
        s += th[static_cast<std::size_t>(l) + 1] * d2(l);
      }
      const double ln20 = std::log(20.0);
      const double e20 = std::exp(ln20 / lam);
      const double c = e20 - 1.0;
      const double dc = -ln20 * e20 / (lam * lam);
      const double ddc = ln20 * e20 * (ln20 / std::pow(lam, 4) + 2.0 / std::pow(lam, 3));
      const double g = 1.0 + c * s;
      const double lg = std::log(g);
      const double k = std::pow(g, -lam);
      const double h = -lg - lam * dc * s / g;
      const double dh = -2.0 * dc * s / g - lam * ddc * s / g + lam * (dc * s) * (dc * s) / (g * g);
      out(0, 0) = k * (h * h + dh);
      const double gl1 = std::pow(g, -lam - 1.0);
      for (Eigen::Index l = 0; l < p; ++l) {
        const double cross = -d2(l) * ((c + lam * dc) * gl1 + lam * c * gl1 * (-lg - (lam + 1.0) * dc * s / g));
        out(0, l + 1) = out(l + 1, 0) = cross;
        for (Eigen::Index m = 0; m < p; ++m)
          out(l + 1, m + 1) = lam * (lam + 1.0) * c * c * d2(l) * d2(m) * std::pow(g, -lam - 2.0);
      }
      return;
    }
    case KernelFamily::MATERN: {
      const double d = (u - v).norm();
      if (d == 0.0) return;
      const double x = th[0] * d;
      if (t.matern_order == 1.5) {
        out(0, 0) = d * d * std::exp(-x) * (x - 1.0);
        return;
      }
      const double a = t.matern_order;
      out(0, 0) = -matern_norm(a) * d * d * (xpow_bessel(a - 1.0, a - 1.0, x) - xpow_bessel(a, a - 2.0, x));
      return;
    }
  }
}

}  // namespace detail

/// k(u, v): sum over terms.
inline double kernel_eval(const KernelConfig& cfg, const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  detail::check_points(cfg, u, v);
  double s = 0.0;
  for (const auto& t : cfg.terms()) s += detail::term_eval(t, u, v);
  return s;
}

/// ∂k(u, v)/∂θ in the flat parameter order of `cfg.params()`.
inline Vector kernel_grad(const KernelConfig& cfg, const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  detail::check_points(cfg, u, v);
  Vector g(cfg.param_count());
  std::size_t offset = 0;
  for (const auto& t : cfg.terms()) {
    detail::term_grad(t, u, v, std::span<double>(g.data() + offset, t.params.size()));
    offset += t.params.size();
  }
  return g;
}

/// ∂²k(u, v)/∂θ∂θᵀ; block diagonal over terms.
inline Matrix kernel_hess(const KernelConfig& cfg, const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  detail::check_points(cfg, u, v);
  const Eigen::Index np = cfg.param_count();
  Matrix h = Matrix::Zero(np, np);
  Eigen::Index offset = 0;
  for (const auto& t : cfg.terms()) {
    const auto k = static_cast<Eigen::Index>(t.params.size());
    detail::term_hess(t, u, v, h.block(offset, offset, k, k));
    offset += k;
  }
  return h;
}

/// K with K_ij = k(x_i, x_j) for the rows of X; exactly symmetric.
inline Matrix gram(const KernelConfig& cfg, const Matrix& x) {
  if (x.cols() != cfg.input_dim()) throw DimensionError("design matrix has wrong number of columns");
  const Eigen::Index n = x.rows();
  Matrix k(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) k(i, j) = kernel_eval(cfg, x.row(i).transpose(), x.row(j).transpose());
  symmetrize_from_upper(k);
  return k;
}

/// Cross-covariance K(U, X) with rows indexed by U.
inline Matrix cross_gram(const KernelConfig& cfg, const Matrix& u, const Matrix& x) {
  if (x.cols() != cfg.input_dim() || u.cols() != cfg.input_dim())
    throw DimensionError("design matrix has wrong number of columns");
  Matrix k(u.rows(), x.rows());
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) k(i, j) = kernel_eval(cfg, u.row(i).transpose(), x.row(j).transpose());
  return k;
}

/// ∂K/∂θ_param for all parameters at once; element a is the n × n derivative
/// matrix for flat parameter a.
inline std::vector<Matrix> gram_grads(const KernelConfig& cfg, const Matrix& x) {
  if (x.cols() != cfg.input_dim()) throw DimensionError("design matrix has wrong number of columns");
  const Eigen::Index n = x.rows();
  const int np = cfg.param_count();
  std::vector<Matrix> out(static_cast<std::size_t>(np), Matrix(n, n));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      const Vector g = kernel_grad(cfg, x.row(i).transpose(), x.row(j).transpose());
      for (int a = 0; a < np; ++a) out[static_cast<std::size_t>(a)](i, j) = g(a);
    }
  for (auto& m : out) symmetrize_from_upper(m);
  return out;
}

inline Matrix gram_grad(const KernelConfig& cfg, const Matrix& x, int param_index) {
  if (param_index < 0 || param_index >= cfg.param_count()) throw IndexError("kernel parameter index out of range");
  return gram_grads(cfg, x)[static_cast<std::size_t>(param_index)];
}

/// ∂²K/∂θ_a∂θ_b, indexed [a * np + b].
inline std::vector<Matrix> gram_hessians(const KernelConfig& cfg, const Matrix& x) {
  const Eigen::Index n = x.rows();
  const int np = cfg.param_count();
  std::vector<Matrix> out(static_cast<std::size_t>(np * np), Matrix(n, n));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      const Matrix h = kernel_hess(cfg, x.row(i).transpose(), x.row(j).transpose());
      for (int a = 0; a < np; ++a)
        for (int b = 0; b < np; ++b) out[static_cast<std::size_t>(a * np + b)](i, j) = h(a, b);
    }
  for (auto& m : out) symmetrize_from_upper(m);
  return out;
}

}  // namespace etpr

#endif  // ETPR_KERNELS_HPP
