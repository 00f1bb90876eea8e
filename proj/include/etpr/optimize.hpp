#ifndef ETPR_OPTIMIZE_HPP
#define ETPR_OPTIMIZE_HPP

// BFGS minimizer with a strong-Wolfe line search (bracketing + cubic zoom).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "etpr/linalg.hpp"

namespace etpr {

/// Returns f(x) and writes ∇f(x) into grad. A non-finite return marks x as
/// infeasible; the line search then backs off.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct BfgsOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8;  // on ‖∇f‖∞
  double c1 = 1e-4;
  double c2 = 0.9;
  double max_first_step = 2.0;  // ‖Δx‖∞ cap for the first trial step
  int max_line_search = 40;
  std::function<bool(const Vector&)> stop;  // checked after each accepted step
};

struct OptimResult {
  Vector x;
  double value = std::numeric_limits<double>::infinity();
  Vector grad;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

namespace detail {

struct LinePoint {
  double a;
  double f;
  double d;  // directional derivative
};

// Minimizer of the cubic through two points with derivatives, clipped to
// the interior of [lo, hi]; bisection when the cubic is unusable.
inline double cubic_min(const LinePoint& p, const LinePoint& q) {
  const double lo = std::min(p.a, q.a), hi = std::max(p.a, q.a);
  const double mid = 0.5 * (lo + hi);
  if (!std::isfinite(p.f) || !std::isfinite(q.f) || !std::isfinite(p.d) || !std::isfinite(q.d)) return mid;
  const double d1 = p.d + q.d - 3.0 * (p.f - q.f) / (p.a - q.a);
  const double disc = d1 * d1 - p.d * q.d;
  if (disc < 0.0) return mid;
  const double d2 = std::copysign(std::sqrt(disc), q.a - p.a);
  const double den = q.d - p.d + 2.0 * d2;
  if (den == 0.0) return mid;
  const double a = q.a - (q.a - p.a) * (q.d + d2 - d1) / den;
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(a) || a < lo + margin || a > hi - margin) return mid;
  return a;
}

}  // namespace detail

inline OptimResult bfgs_minimize(const Objective& fn, const Vector& x0, const BfgsOptions& opt = {}) {
  OptimResult res;
  const Eigen::Index n = x0.size();
  Vector x = x0, g(n);
  double f = fn(x, g);
  res.evaluations = 1;
  if (!std::isfinite(f) || !g.allFinite()) {
    res.x = x;
    res.value = std::numeric_limits<double>::infinity();
    res.grad = Vector::Zero(n);
    res.message = "objective not finite at the starting point";
    return res;
  }
  Matrix hinv = Matrix::Identity(n, n);
  bool fresh = true;

  auto eval = [&](double a, const Vector& p, Vector& xa, Vector& ga) {
    xa = x + a * p;
    ++res.evaluations;
    double v = fn(xa, ga);
    if (!std::isfinite(v) || !ga.allFinite()) v = std::numeric_limits<double>::infinity();
    return detail::LinePoint{a, v, std::isfinite(v) ? ga.dot(p) : std::numeric_limits<double>::quiet_NaN()};
  };

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it;
    if (g.cwiseAbs().maxCoeff() <= opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Vector p = -hinv * g;
    double d0 = g.dot(p);
    if (!(d0 < 0.0)) {
      hinv.setIdentity();
      fresh = true;
      p = -g;
      d0 = g.dot(p);
    }
    double a1 = 1.0;
    if (fresh) a1 = std::min(1.0, opt.max_first_step / p.cwiseAbs().maxCoeff());

    // Strong-Wolfe search.
    const detail::LinePoint p0{0.0, f, d0};
    detail::LinePoint prev = p0, cur{};
    Vector xa(n), ga(n), xbest, gbest;
    bool found = false;
    double a = a1;
    auto accept = [&](const detail::LinePoint& pt) {
      xbest = xa;
      gbest = ga;
      cur = pt;
      found = true;
    };
    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) {
      for (int k = 0; k < opt.max_line_search; ++k) {
        const double aj = detail::cubic_min(lo, hi);
        const auto pj = eval(aj, p, xa, ga);
        if (!(pj.f <= f + opt.c1 * aj * d0) || pj.f >= lo.f) {
          hi = pj;
        } else {
          if (std::abs(pj.d) <= -opt.c2 * d0) {
            accept(pj);
            return;
          }
          if (pj.d * (hi.a - lo.a) >= 0.0) hi = lo;
          lo = pj;
        }
        if (std::abs(hi.a - lo.a) < 1e-16 * std::max(1.0, std::abs(lo.a))) break;
      }
      // Fall back to the best sufficient-decrease point seen.
      if (lo.a > 0.0) {
        eval(lo.a, p, xa, ga);
        accept(lo);
      }
    };
    for (int k = 0; k < opt.max_line_search && !found; ++k) {
      const auto pa = eval(a, p, xa, ga);
      if (!(pa.f <= f + opt.c1 * a * d0) || (k > 0 && pa.f >= prev.f)) {
        zoom(prev, pa);
        break;
      }
      if (std::abs(pa.d) <= -opt.c2 * d0) {
        accept(pa);
        break;
      }
      if (pa.d >= 0.0) {
        zoom(pa, prev);
        break;
      }
      prev = pa;
      a *= 2.0;
    }
    if (!found) {
      // Near the optimum f stops resolving decrease; search on the
      // directional derivative alone, allowing round-off-level increases.
      const double slack = 1e-11 * std::max(1.0, std::abs(f));
      auto ok = [&](const detail::LinePoint& pt) { return std::isfinite(pt.f) && pt.f <= f + slack; };
      detail::LinePoint lo = p0, hi{};
      bool bracketed = false;
      double at = a1;
      for (int k = 0; k < opt.max_line_search; ++k) {
        const auto pt = eval(at, p, xa, ga);
        if (!ok(pt)) {
          hi = pt;
          hi.d = std::numeric_limits<double>::infinity();
          bracketed = true;
          break;
        }
        if (std::abs(pt.d) <= -opt.c2 * d0) {
          accept(pt);
          break;
        }
        if (pt.d > 0.0) {
          hi = pt;
          bracketed = true;
          break;
        }
        lo = pt;
        at *= 2.0;
      }
      for (int k = 0; bracketed && !found && k < opt.max_line_search; ++k) {
        double am = 0.5 * (lo.a + hi.a);
        if (std::isfinite(hi.d) && hi.d > lo.d) {
          const double sec = lo.a - lo.d * (hi.a - lo.a) / (hi.d - lo.d);
          const double margin = 0.1 * (hi.a - lo.a);
          if (sec > lo.a + margin && sec < hi.a - margin) am = sec;
        }
        const auto pt = eval(am, p, xa, ga);
        if (!ok(pt) || pt.d > 0.0) {
          if (ok(pt) && std::abs(pt.d) <= -opt.c2 * d0) {
            accept(pt);
            break;
          }
          hi = pt;
          if (!ok(pt)) hi.d = std::numeric_limits<double>::infinity();
        } else {
          if (std::abs(pt.d) <= -opt.c2 * d0) {
            accept(pt);
            break;
          }
          lo = pt;
        }
      }
      if (!found && lo.a > 0.0 && lo.d < 0.0) {
        eval(lo.a, p, xa, ga);
        accept(lo);
      }
    }
    if (!found) {
      if (!fresh) {
        hinv.setIdentity();
        fresh = true;
        continue;
      }
      res.message = "line search failed";
      break;
    }

    const Vector s = xbest - x;
    const Vector yv = gbest - g;
    x = xbest;
    g = gbest;
    f = cur.f;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (fresh) hinv *= sy / yv.squaredNorm();
      const double rho = 1.0 / sy;
      const Vector hy = hinv * yv;
      hinv += ((sy + yv.dot(hy)) * rho * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
      fresh = false;
    }
    if (s.cwiseAbs().maxCoeff() == 0.0) {
      res.message = "no progress";
      break;
    }
    res.iterations = it + 1;
    if (opt.stop && opt.stop(x)) {
      res.message = "stopped by caller";
      break;
    }
  }
  if (!res.converged && g.cwiseAbs().maxCoeff() <= opt.gradient_tolerance) res.converged = true;
  if (!res.converged && res.message.empty()) res.message = "iteration limit reached";
  res.x = x;
  res.value = f;
  res.grad = g;
  return res;
}

}  // namespace etpr

#endif  // ETPR_OPTIMIZE_HPP
