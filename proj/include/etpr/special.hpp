#ifndef ETPR_SPECIAL_HPP
#define ETPR_SPECIAL_HPP

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>

namespace etpr::special {

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double lgamma(double x) { return boost::math::lgamma(x); }

/// ψ(x); satisfies ψ(x + 1) = ψ(x) + 1/x.
inline double digamma(double x) { return boost::math::digamma(x); }

/// Quantile of Student-t with `dof` degrees of freedom; dof = +inf gives the
/// standard normal quantile.
inline double student_t_quantile(double dof, double p) {
  if (std::isinf(dof)) return boost::math::quantile(boost::math::normal_distribution<double>(), p);
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), p);
}

inline double student_t_cdf(double dof, double x) {
  if (std::isinf(dof)) return boost::math::cdf(boost::math::normal_distribution<double>(), x);
  return boost::math::cdf(boost::math::students_t_distribution<double>(dof), x);
}

/// Modified Bessel function of the second kind K_order(x), x > 0.
inline double bessel_k(double order, double x) { return boost::math::cyl_bessel_k(order, x); }

}  // namespace etpr::special

#endif  // ETPR_SPECIAL_HPP
