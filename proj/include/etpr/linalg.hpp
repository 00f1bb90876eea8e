#ifndef ETPR_LINALG_HPP
#define ETPR_LINALG_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "etpr/errors.hpp"

namespace etpr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Cholesky factor of a symmetric positive-definite matrix with the jitter
/// repair policy applied: factor as is, and on failure add
/// 1e-10 * trace / n to the diagonal, escalating by 10x up to 1e-6 * trace / n.
class Cholesky {
 public:
  Cholesky() = default;

  explicit Cholesky(const Matrix& a) { factor(a); }

  const Eigen::LLT<Matrix>& llt() const { return llt_; }
  Matrix lower() const { return llt_.matrixL(); }
  Eigen::Index dim() const { return llt_.rows(); }
  /// Diagonal jitter that was added (0 when the matrix factored as given).
  double jitter() const { return jitter_; }

  double log_det() const {
    const auto& l = llt_.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
  }

  template <typename Rhs>
  auto solve(const Eigen::MatrixBase<Rhs>& b) const {
    return llt_.solve(b);
  }

  /// xᵀ A⁻¹ x via a single triangular solve.
  double quad_form(const Vector& x) const {
    Vector w = llt_.matrixL().solve(x);
    return w.squaredNorm();
  }

  Matrix inverse() const {
    return llt_.solve(Matrix::Identity(dim(), dim()));
  }

 private:
  void factor(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("scale matrix is not square");
    const Eigen::Index n = a.rows();
    if (n == 0) throw DimensionError("scale matrix is empty");
    if (!a.allFinite()) throw SingularScale("scale matrix has non-finite entries");
    if (try_factor(a)) return;
    const double base = std::abs(a.trace()) / static_cast<double>(n);
    for (double rel = 1e-10; rel <= 1e-6 * (1.0 + 1e-9); rel *= 10.0) {
      Matrix b = a;
      b.diagonal().array() += rel * base;
      if (try_factor(b)) {
        jitter_ = rel * base;
        return;
      }
    }
    throw SingularScale("scale matrix is not positive definite after jitter up to 1e-6*trace/n");
  }

  bool try_factor(const Matrix& a) {
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) return false;
    const auto& l = llt_.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      const double d = l(i, i);
      if (!(d > 0.0) || !std::isfinite(d)) return false;
    }
    return true;
  }

  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

/// Copies the upper triangle onto the lower one.
inline void symmetrize_from_upper(Matrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = j + 1; i < a.rows(); ++i) a(i, j) = a(j, i);
}

}  // namespace etpr

#endif  // ETPR_LINALG_HPP
