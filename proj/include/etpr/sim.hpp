#ifndef ETPR_SIM_HPP
#define ETPR_SIM_HPP

// Simulation designs, contamination injectors and the replication runner.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "etpr/emtd.hpp"
#include "etpr/errors.hpp"
#include "etpr/estimate.hpp"
#include "etpr/kernels.hpp"
#include "etpr/model.hpp"
#include "etpr/parallel.hpp"
#include "etpr/predict.hpp"
#include "etpr/rng.hpp"

namespace etpr {

enum class DesignKind { EVEN_GRID, RANDOM_SUBSET };

/// Full grid of N points; row j has coordinate l equal to the j-th of N
/// evenly spaced values in ranges[l].
///   EVEN_GRID, rule "even":        n grid orders evenly spaced over 0..N−1.
///   EVEN_GRID, rule "sparse_tail": n−1 orders evenly spaced over
///                                  0..dense_count−1, plus the last point.
///   RANDOM_SUBSET:                 n orders drawn without replacement per curve.
struct Design {
  DesignKind kind = DesignKind::EVEN_GRID;
  std::vector<std::array<double, 2>> ranges{{0.0, 3.0}};
  int grid_size = 50;
  std::string train_rule = "even";
  int dense_count = 46;
};

enum class ContaminationKind { NONE, GAUSS_AT_POINT, CONSTANT_AT_POINT, T_ERROR, PEAK };

/// Training-set contamination. `index` addresses a training point within a
/// curve (negative counts from the end, so −1 is the last one).
///   GAUSS_AT_POINT:    y += N(0, variance) at index, every curve.
///   CONSTANT_AT_POINT: y += delta at index, every curve.
///   T_ERROR:           y += t_df draw on `count` curves chosen at random, at
///                      `index` if given, else at a random training point.
///   PEAK:              per curve, with prob. `probability`, y += ±amplitude on
///                      T ≤ s ≤ T + width, where s is the first coordinate
///                      mapped to [0, 1] through [domain_lo, domain_hi] and
///                      T ~ U[0, 1 − width] (or `start` when given).
struct Contamination {
  ContaminationKind kind = ContaminationKind::NONE;
  std::optional<int> index;
  double variance = 0.0;
  double delta = 0.0;
  double df = 2.0;
  int count = 1;
  double probability = 0.8;
  double amplitude = 4.0;
  double width = 1.0 / 15.0;
  std::optional<double> start;
  std::optional<double> sign;  // fixed ±1 for PEAK; random when empty
  double domain_lo = 0.0;
  double domain_hi = 1.0;
};

enum class Method { GPR, ETPR, ETPR_FIXED, ORACLE };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::GPR: return "GPR";
    case Method::ETPR: return "eTPR";
    case Method::ETPR_FIXED: return "eTPR-fixed-nu";
    case Method::ORACLE: return "oracle";
  }
  return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
  for (Method m : {Method::GPR, Method::ETPR, Method::ETPR_FIXED, Method::ORACLE})
    if (s == method_name(m)) return m;
  return std::nullopt;
}

/// Data-generating kernel is SE + LIN with theta_true = (η₀, η_1..η_p, ξ_0..ξ_{p−1}).
struct ScenarioConfig {
  int case_id = 1;
  int m = 1;
  int n = 10;
  int p = 1;
  std::vector<double> theta_true{0.05, 2.0, 0.05};
  double phi_true = 0.1;
  Design design;
  Contamination contamination;
  int replications = 1;
  std::uint64_t seed = 0;
  double case_nu = 2.0;  // IG(ν, ω) mixing law of cases 5 and 6
  double case_omega = 2.0;
  std::optional<KernelConfig> fit_kernel;  // SE + LIN at unit values when empty
  double fixed_nu = 1.05;
  int restarts = 5;
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8;
  int threads = 1;

  void validate() const {
    if (case_id < 1 || case_id > 6) throw InvalidOptions("case_id must be in 1..6");
    if (m < 1) throw InvalidOptions("m must be at least 1");
    if (p < 1) throw InvalidOptions("p must be at least 1");
    if (n < 1 || n >= design.grid_size) throw InvalidOptions("n must be in [1, grid_size)");
    if (replications < 1) throw InvalidOptions("replications must be at least 1");
    if (static_cast<int>(design.ranges.size()) != p) throw InvalidOptions("design needs one range per input dimension");
    if (static_cast<int>(theta_true.size()) != 2 * p + 1) throw InvalidOptions("theta_true must have 2p + 1 entries");
    if (!(phi_true > 0.0)) throw InvalidOptions("phi_true must be positive");
    if (design.kind == DesignKind::EVEN_GRID && design.train_rule != "even" && design.train_rule != "sparse_tail")
      throw InvalidOptions("train_rule must be 'even' or 'sparse_tail'");
    if (design.train_rule == "sparse_tail" && (design.dense_count < n - 1 || design.dense_count >= design.grid_size))
      throw InvalidOptions("dense_count must be in [n - 1, grid_size)");
    if (fit_kernel && fit_kernel->input_dim() != p) throw InvalidOptions("fit kernel input dimension must equal p");
    if (!(fixed_nu > kNuLowerBound)) throw InvalidOptions("fixed_nu must exceed 1");
    if (!(case_nu > 0.0) || !(case_omega > 0.0)) throw InvalidOptions("case_nu and case_omega must be positive");
    const auto& c = contamination;
    switch (c.kind) {
      case ContaminationKind::GAUSS_AT_POINT:
        if (!(c.variance >= 0.0)) throw InvalidOptions("contamination variance must be nonnegative");
        break;
      case ContaminationKind::T_ERROR:
        if (!(c.df > 0.0)) throw InvalidOptions("t error df must be positive");
        if (c.count < 0 || c.count > m) throw InvalidOptions("t error count must be in [0, m]");
        break;
      case ContaminationKind::PEAK:
        if (!(c.probability >= 0.0 && c.probability <= 1.0)) throw InvalidOptions("peak probability must be in [0, 1]");
        if (!(c.width > 0.0 && c.width < 1.0)) throw InvalidOptions("peak width must be in (0, 1)");
        break;
      default: break;
    }
  }

  KernelConfig truth_kernel() const {
    std::vector<double> se(theta_true.begin(), theta_true.begin() + p + 1);
    std::vector<double> lin(theta_true.begin() + p + 1, theta_true.end());
    return KernelConfig({{KernelFamily::SE, se}, {KernelFamily::LIN, lin}}, p);
  }

  KernelConfig fitting_kernel() const {
    if (fit_kernel) return *fit_kernel;
    const std::array<KernelFamily, 2> fam{KernelFamily::SE, KernelFamily::LIN};
    return KernelConfig::with_defaults(fam, p);
  }
};

struct SimDraw {
  Dataset train;
  Dataset test;
  std::vector<Vector> truth;                  // f at test inputs, per curve
  std::vector<std::vector<int>> train_index;  // grid orders of training rows
};

namespace detail {

inline Matrix design_grid(const Design& d) {
  const int p = static_cast<int>(d.ranges.size());
  Matrix g(d.grid_size, p);
  for (int l = 0; l < p; ++l) {
    const double lo = d.ranges[static_cast<std::size_t>(l)][0], hi = d.ranges[static_cast<std::size_t>(l)][1];
    for (int j = 0; j < d.grid_size; ++j)
      g(j, l) = d.grid_size == 1 ? lo : lo + (hi - lo) * j / static_cast<double>(d.grid_size - 1);
  }
  return g;
}

// round(linspace(0, last, count))
inline std::vector<int> even_orders(int last, int count) {
  std::vector<int> out;
  for (int k = 0; k < count; ++k)
    out.push_back(count == 1 ? 0 : static_cast<int>(std::lround(last * k / static_cast<double>(count - 1))));
  return out;
}

inline std::vector<int> train_orders(const ScenarioConfig& cfg, CounterRng& rng) {
  const auto& d = cfg.design;
  std::vector<int> idx;
  if (d.kind == DesignKind::RANDOM_SUBSET) {
    std::vector<int> all(static_cast<std::size_t>(d.grid_size));
    std::iota(all.begin(), all.end(), 0);
    for (int k = 0; k < cfg.n; ++k) {
      std::uniform_int_distribution<int> pick(k, d.grid_size - 1);
      std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
    }
    idx.assign(all.begin(), all.begin() + cfg.n);
    std::sort(idx.begin(), idx.end());
  } else if (d.train_rule == "sparse_tail") {
    idx = even_orders(d.dense_count - 1, cfg.n - 1);
    idx.push_back(d.grid_size - 1);
  } else {
    idx = even_orders(d.grid_size - 1, cfg.n);
  }
  return idx;
}

template <typename Rng>
double student_t_draw(double df, Rng& rng) {
  std::normal_distribution<double> z;
  std::chi_squared_distribution<double> chi(df);
  return z(rng) / std::sqrt(chi(rng) / df);
}

inline Matrix rows_of(const Matrix& a, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = a.row(idx[k]);
  return out;
}

inline Vector entries_of(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(idx[k]);
  return out;
}

inline int resolve_index(int index, Eigen::Index n) {
  const int i = index < 0 ? static_cast<int>(n) + index : index;
  if (i < 0 || i >= n) throw IndexError("contamination index out of range");
  return i;
}

}  // namespace detail

/// Draws replication `replication`: full-grid f and ε from the case's law,
/// then the train/test split. Pure function of (config, replication).
///   Cases 1, 2: f ~ GP(0, k), ε ~ N(0, φ).
///   Cases 3, 4: f ~ GP(0, k), ε ~ √φ · t₂.
///   Case 5:     f ~ ETP(ν, ω, 0, k) and ε ~ ETP(ν, ω, 0, φδ) independently.
///   Case 6:     one r ~ IG(ν, ω) per curve scales both f and ε.
inline SimDraw generate(const ScenarioConfig& cfg, int replication) {
  cfg.validate();
  const std::uint64_t rep_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(replication));
  const Matrix grid = detail::design_grid(cfg.design);
  const Cholesky chol(gram(cfg.truth_kernel(), grid));
  const Matrix l = chol.lower();
  const IgParams mix(cfg.case_nu, cfg.case_omega);
  const double sphi = std::sqrt(cfg.phi_true);
  const Eigen::Index big_n = grid.rows();

  SimDraw out;
  out.train.input_dim = out.test.input_dim = cfg.p;
  for (int i = 0; i < cfg.m; ++i) {
    CounterRng rng(rep_seed, static_cast<std::uint64_t>(i) + 1);
    std::normal_distribution<double> z;
    double rf = 1.0, re = 1.0;
    if (cfg.case_id == 5) {
      rf = mix.sample(rng);
      re = mix.sample(rng);
    } else if (cfg.case_id == 6) {
      rf = re = mix.sample(rng);
    }
    Vector e(big_n);
    for (Eigen::Index j = 0; j < big_n; ++j) e(j) = z(rng);
    const Vector f = std::sqrt(rf) * (l * e);
    Vector eps(big_n);
    for (Eigen::Index j = 0; j < big_n; ++j)
      eps(j) = (cfg.case_id == 3 || cfg.case_id == 4) ? sphi * detail::student_t_draw(2.0, rng)
                                                       : std::sqrt(re) * sphi * z(rng);
    const Vector y = f + eps;

    CounterRng design_rng(rep_seed, 1000000 + static_cast<std::uint64_t>(i));
    const auto tr = detail::train_orders(cfg, design_rng);
    std::vector<bool> in_train(static_cast<std::size_t>(big_n), false);
    for (int k : tr) in_train[static_cast<std::size_t>(k)] = true;
    std::vector<int> te;
    for (int k = 0; k < big_n; ++k)
      if (!in_train[static_cast<std::size_t>(k)]) te.push_back(k);

    out.train.curves.push_back({detail::rows_of(grid, tr), detail::entries_of(y, tr)});
    out.test.curves.push_back({detail::rows_of(grid, te), detail::entries_of(y, te)});
    out.truth.push_back(detail::entries_of(f, te));
    out.train_index.push_back(tr);
  }
  return out;
}

/// Contaminated copy of `train`; the input is not modified.
inline Dataset contaminate(const Dataset& train, const Contamination& cont, std::uint64_t seed) {
  Dataset d = train;
  CounterRng rng(seed, 0);
  std::normal_distribution<double> z;
  const int m = d.size();
  switch (cont.kind) {
    case ContaminationKind::NONE: break;
    case ContaminationKind::GAUSS_AT_POINT:
      for (auto& c : d.curves) c.y(detail::resolve_index(cont.index.value_or(-1), c.y.size())) += std::sqrt(cont.variance) * z(rng);
      break;
    case ContaminationKind::CONSTANT_AT_POINT:
      for (auto& c : d.curves) c.y(detail::resolve_index(cont.index.value_or(-1), c.y.size())) += cont.delta;
      break;
    case ContaminationKind::T_ERROR: {
      if (cont.count > m) throw IndexError("t error count exceeds number of curves");
      std::vector<int> order(static_cast<std::size_t>(m));
      std::iota(order.begin(), order.end(), 0);
      for (int k = 0; k < cont.count; ++k) {
        std::uniform_int_distribution<int> pick(k, m - 1);
        std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(pick(rng))]);
      }
      for (int k = 0; k < cont.count; ++k) {
        auto& c = d.curves[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
        int j;
        if (cont.index) {
          j = detail::resolve_index(*cont.index, c.y.size());
        } else {
          std::uniform_int_distribution<int> pick(0, static_cast<int>(c.y.size()) - 1);
          j = pick(rng);
        }
        c.y(j) += detail::student_t_draw(cont.df, rng);
      }
      break;
    }
    case ContaminationKind::PEAK: {
      const double span = cont.domain_hi - cont.domain_lo;
      if (!(span > 0.0)) throw InvalidOptions("peak domain must have positive length");
      for (auto& c : d.curves) {
        const bool on = rng.uniform() < cont.probability;
        const double sgn = cont.sign ? *cont.sign : (rng.uniform() < 0.5 ? -1.0 : 1.0);
        const double t0 = cont.start ? *cont.start : (1.0 - cont.width) * rng.uniform();
        if (!on) continue;
        for (Eigen::Index j = 0; j < c.y.size(); ++j) {
          const double s = (c.x(j, 0) - cont.domain_lo) / span;
          if (s >= t0 && s <= t0 + cont.width) c.y(j) += cont.amplitude * sgn;
        }
      }
      break;
    }
  }
  return d;
}

/// Mean squared deviation.
inline double mse(const Vector& predictions, const Vector& truth) {
  if (predictions.size() != truth.size()) throw DimensionError("mse: length mismatch");
  if (truth.size() < 1) throw DimensionError("mse: empty input");
  return (predictions - truth).squaredNorm() / static_cast<double>(truth.size());
}

struct ReplicationRecord {
  int replication = 0;
  std::uint64_t seed = 0;
  Method method = Method::GPR;
  bool failed = false;
  bool converged = false;
  double mse = std::numeric_limits<double>::quiet_NaN();
  double nu = std::numeric_limits<double>::quiet_NaN();
  double log_likelihood = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct MethodSummary {
  Method method;
  double mean_mse = std::numeric_limits<double>::quiet_NaN();
  double sd_mse = std::numeric_limits<double>::quiet_NaN();
  int replications = 0;  // successful fits
  int failures = 0;
  int not_converged = 0;
};

struct BenchResult {
  std::vector<MethodSummary> summaries;
  std::vector<ReplicationRecord> records;  // replication-major, method order within

  const MethodSummary& summary(Method m) const {
    for (const auto& s : summaries)
      if (s.method == m) return s;
    throw InvalidOptions("method not part of this benchmark: " + method_name(m));
  }
};

/// Fit options used by `method` on a dataset with `m` curves.
inline FitOptions method_fit_options(const ScenarioConfig& cfg, Method method, int m, std::uint64_t seed) {
  FitOptions o;
  o.restarts = cfg.restarts;
  o.max_iterations = cfg.max_iterations;
  o.gradient_tolerance = cfg.gradient_tolerance;
  o.seed = seed;
  switch (method) {
    case Method::GPR: o.mode = FitMode::GPR; break;
    case Method::ETPR:
      o.mode = FitMode::ETPR;
      o.nu_policy = m > 1 ? NuPolicy::estimate() : NuPolicy::fixed(cfg.fixed_nu);
      break;
    default:
      o.mode = FitMode::ETPR;
      o.nu_policy = NuPolicy::fixed(cfg.fixed_nu);
      break;
  }
  return o;
}

/// Evaluates `method` on one replication; fit errors are recorded, not thrown.
inline ReplicationRecord run_replication(const ScenarioConfig& cfg, Method method, int replication) {
  ReplicationRecord rec;
  rec.replication = replication;
  rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(replication));
  rec.method = method;
  const SimDraw draw = generate(cfg, replication);
  Contamination cont = cfg.contamination;
  if (cont.kind == ContaminationKind::PEAK) {
    cont.domain_lo = cfg.design.ranges[0][0];
    cont.domain_hi = cfg.design.ranges[0][1];
  }
  const Dataset train = contaminate(draw.train, cont, derive_seed(rec.seed, 0xC0FFEE));
  double sq = 0.0;
  int count = 0;
  if (method == Method::ORACLE) {
    for (const auto& t : draw.truth) {
      sq += mse(t, t) * static_cast<double>(t.size());
      count += static_cast<int>(t.size());
    }
    rec.converged = true;
    rec.mse = sq / count;
    return rec;
  }
  try {
    const auto fm = fit(train, cfg.fitting_kernel(), method_fit_options(cfg, method, train.size(), rec.seed));
    for (int i = 0; i < train.size(); ++i) {
      const auto preds = predict_f(fm, i, draw.test.curves[static_cast<std::size_t>(i)].x);
      const Vector& truth = draw.truth[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < truth.size(); ++j) {
        const double dlt = preds[static_cast<std::size_t>(j)].mean - truth(j);
        sq += dlt * dlt;
      }
      count += static_cast<int>(truth.size());
    }
    rec.converged = fm.converged;
    rec.mse = sq / count;
    rec.nu = fm.params.nu();
    rec.log_likelihood = fm.log_likelihood;
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

/// Mean and sample sd of successful replications per method.
inline std::vector<MethodSummary> aggregate(const std::vector<ReplicationRecord>& records,
                                            const std::vector<Method>& methods) {
  std::vector<MethodSummary> out;
  for (Method m : methods) {
    MethodSummary s{m};
    double sum = 0.0;
    for (const auto& r : records)
      if (r.method == m) {
        if (r.failed) {
          ++s.failures;
          continue;
        }
        ++s.replications;
        if (!r.converged) ++s.not_converged;
        sum += r.mse;
      }
    if (s.replications > 0) {
      s.mean_mse = sum / s.replications;
      double ss = 0.0;
      for (const auto& r : records)
        if (r.method == m && !r.failed) ss += (r.mse - s.mean_mse) * (r.mse - s.mean_mse);
      s.sd_mse = s.replications > 1 ? std::sqrt(ss / (s.replications - 1)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

inline BenchResult run_benchmark(const ScenarioConfig& cfg, const std::vector<Method>& methods) {
  cfg.validate();
  if (methods.empty()) throw InvalidOptions("benchmark needs at least one method");
  const int nm = static_cast<int>(methods.size());
  std::vector<ReplicationRecord> records(static_cast<std::size_t>(cfg.replications * nm));
  parallel_for(cfg.replications * nm, cfg.threads, [&](int k) {
    records[static_cast<std::size_t>(k)] = run_replication(cfg, methods[static_cast<std::size_t>(k % nm)], k / nm);
  });
  return BenchResult{aggregate(records, methods), std::move(records)};
}

}  // namespace etpr

#endif  // ETPR_SIM_HPP
