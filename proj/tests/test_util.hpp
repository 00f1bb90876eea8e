#ifndef ETPR_TEST_UTIL_HPP
#define ETPR_TEST_UTIL_HPP

#include <functional>
#include <random>

#include "etpr/etpr.hpp"

namespace etpr::test {

inline Matrix random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = z(rng);
  return a * a.transpose() / n + 0.5 * Matrix::Identity(n, n);
}

inline Vector random_vector(int n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

/// m curves of n sorted points in [0, 3]^p with smooth signal plus noise.
inline Dataset random_dataset(int m, int n, int p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::normal_distribution<double> z(0.0, 0.3);
  Dataset d;
  d.input_dim = p;
  for (int i = 0; i < m; ++i) {
    Curve c{Matrix(n, p), Vector(n)};
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int l = 0; l < p; ++l) {
        c.x(j, l) = u(rng);
        s += std::sin(1.3 * c.x(j, l) + i);
      }
      c.y(j) = s + z(rng);
    }
    d.curves.push_back(std::move(c));
  }
  return d;
}

/// Central difference of f along coordinate k with step h·max(1, |x_k|).
inline double central_diff(const std::function<double(const Vector&)>& f, Vector x, int k, double h = 1e-5) {
  const double step = h * std::max(1.0, std::abs(x(k)));
  const double x0 = x(k);
  x(k) = x0 + step;
  const double fp = f(x);
  x(k) = x0 - step;
  const double fm = f(x);
  return (fp - fm) / (2.0 * step);
}

/// Richardson-extrapolated central difference (fourth order).
inline double richardson_diff(const std::function<double(const Vector&)>& f, const Vector& x, int k, double h = 1e-3) {
  const double d1 = central_diff(f, x, k, h);
  const double d2 = central_diff(f, x, k, 0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace etpr::test

#endif  // ETPR_TEST_UTIL_HPP
