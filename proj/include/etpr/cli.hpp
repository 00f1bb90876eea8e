#ifndef ETPR_CLI_HPP
#define ETPR_CLI_HPP

// Command-line front end: fit, predict, benchmark, simulate.
// Exit codes: 0 ok, 1 error, 2 fit written but not converged.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <boost/version.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "etpr/estimate.hpp"
#include "etpr/io.hpp"
#include "etpr/parallel.hpp"
#include "etpr/predict.hpp"
#include "etpr/sim.hpp"

namespace etpr::cli {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

struct Flags {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::optional<double> level;
};

// Top-level seed, overridden by --seed.
inline std::uint64_t resolve_seed(const json& cfg, const Flags& f, std::uint64_t fallback = 0) {
  if (f.seed) return *f.seed;
  return io::get_or<std::uint64_t>(cfg, "seed", fallback, "config");
}

inline double check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidOptions("interval level must lie in (0, 1)");
  return level;
}

inline int cmd_fit(const std::string& data_path, const std::string& config_path, const std::string& out_path,
                   const Flags& flags, std::ostream& out) {
  const auto cf = io::parse_curves_csv(io::read_file(data_path));
  const json cfg = io::parse_json(io::read_file(config_path));
  io::check_keys(cfg, {"kernel", "fit", "interval_level", "seed"}, "config");
  const KernelConfig kernel = cfg.contains("kernel") ? io::kernel_from_json(cfg.at("kernel"), cf.data.input_dim)
                                                     : [&] {
                                                         const std::array<KernelFamily, 2> fam{KernelFamily::SE,
                                                                                               KernelFamily::LIN};
                                                         return KernelConfig::with_defaults(fam, cf.data.input_dim);
                                                       }();
  FitOptions opts = cfg.contains("fit") ? io::fit_options_from_json(cfg.at("fit")) : FitOptions{};
  opts.seed = resolve_seed(cfg, flags);
  opts.threads = resolve_threads(flags.threads);
  const double level = check_level(flags.level.value_or(io::get_or<double>(cfg, "interval_level", 0.95, "config")));

  const FittedModel fm = fit(cf.data, kernel, opts);
  io::write_file_atomic(out_path, io::to_json(fm, cf.curve_ids, level).dump(2) + "\n");
  out << "log_likelihood " << io::format_double(fm.log_likelihood) << "\n";
  out << "nu " << io::format_double(fm.params.nu()) << "\n";
  out << "converged " << (fm.converged ? "yes" : "no") << "\n";
  for (const auto& w : fm.warnings) out << "warning: " << w << "\n";
  return fm.converged ? kExitOk : kExitNotConverged;
}

/// Predictions sorted by curve_id, then first coordinate (stable).
inline std::vector<io::PredictionRow> predict_rows(const io::LoadedModel& lm, const io::QueryFile& q, double level,
                                                   bool for_y) {
  std::vector<std::size_t> order(q.curve_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (q.curve_ids[a] != q.curve_ids[b]) return q.curve_ids[a] < q.curve_ids[b];
    return q.x(static_cast<Eigen::Index>(a), 0) < q.x(static_cast<Eigen::Index>(b), 0);
  });
  std::vector<io::PredictionRow> rows;
  rows.reserve(order.size());
  std::size_t k = 0;
  while (k < order.size()) {
    const long long id = q.curve_ids[order[k]];
    const auto it = std::find(lm.curve_ids.begin(), lm.curve_ids.end(), id);
    if (it == lm.curve_ids.end())
      throw IndexError("line " + std::to_string(q.lines[order[k]]) + ": curve_id " + std::to_string(id) +
                       " is not a training curve");
    const int curve = static_cast<int>(it - lm.curve_ids.begin());
    std::size_t e = k;
    while (e < order.size() && q.curve_ids[order[e]] == id) ++e;
    Matrix u(static_cast<Eigen::Index>(e - k), q.input_dim);
    for (std::size_t r = k; r < e; ++r) u.row(static_cast<Eigen::Index>(r - k)) = q.x.row(static_cast<Eigen::Index>(order[r]));
    const auto preds = for_y ? predict_y(lm.model, curve, u, level) : predict_f(lm.model, curve, u, level);
    for (std::size_t r = k; r < e; ++r)
      rows.push_back({id, u.row(static_cast<Eigen::Index>(r - k)).transpose(), preds[r - k]});
    k = e;
  }
  return rows;
}

inline int cmd_predict(const std::string& model_path, const std::string& query_path, const std::string& out_path,
                       const std::string& target, const Flags& flags, std::ostream& out) {
  const auto lm = io::model_from_json(io::parse_json(io::read_file(model_path)));
  const auto q = io::parse_query_csv(io::read_file(query_path));
  if (q.input_dim != lm.model.data.input_dim)
    throw DimensionError("query has " + std::to_string(q.input_dim) + " covariates, model expects " +
                         std::to_string(lm.model.data.input_dim));
  if (target != "f" && target != "y") throw InvalidOptions("--interval must be 'f' or 'y'");
  const double level = check_level(flags.level.value_or(lm.interval_level));
  const auto rows = predict_rows(lm, q, level, target == "y");
  io::write_file_atomic(out_path, io::predictions_csv(rows, q.input_dim));
  out << "predictions " << rows.size() << "\n";
  return kExitOk;
}

// {"benchmark": {"scenario": {...}, "methods": [...]}, "seed": s}
inline std::pair<ScenarioConfig, std::vector<Method>> benchmark_config(const json& cfg, const Flags& flags) {
  io::check_keys(cfg, {"benchmark", "seed"}, "config");
  if (!cfg.contains("benchmark")) throw ParseError("missing key 'benchmark' in config");
  const auto& b = cfg.at("benchmark");
  io::check_keys(b, {"scenario", "methods"}, "benchmark");
  if (!b.contains("scenario")) throw ParseError("missing key 'scenario' in benchmark");
  ScenarioConfig sc = io::scenario_from_json(b.at("scenario"));
  sc.seed = resolve_seed(cfg, flags, sc.seed);
  sc.threads = resolve_threads(flags.threads);
  std::vector<Method> methods{Method::GPR, Method::ETPR};
  if (b.contains("methods")) {
    methods.clear();
    for (const auto& name : io::get_req<std::vector<std::string>>(b, "methods", "benchmark")) {
      const auto m = parse_method(name);
      if (!m) throw ParseError("unknown method '" + name + "' (expected GPR, eTPR, eTPR-fixed-nu or oracle)");
      methods.push_back(*m);
    }
  }
  return {sc, methods};
}

inline json manifest(const std::string& command, const json& cfg, std::uint64_t seed,
                     const std::vector<std::string>& files) {
  return json{{"tool", "etpr"},
              {"command", command},
              {"version", io::kVersion},
              {"model_schema_version", io::kModelSchemaVersion},
              {"config_hash", io::fnv1a_hex(cfg.dump())},
              {"seed", seed},
              {"files", files},
              {"versions",
               {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) +
                              "." + std::to_string(BOOST_VERSION % 100)}}}};
}

inline int cmd_benchmark(const std::string& config_path, const std::string& out_dir, const Flags& flags,
                         std::ostream& out) {
  const json cfg = io::parse_json(io::read_file(config_path));
  const auto [sc, methods] = benchmark_config(cfg, flags);
  std::filesystem::create_directories(out_dir);
  const BenchResult r = run_benchmark(sc, methods);
  const std::filesystem::path dir(out_dir);
  io::write_file_atomic(dir / "summary.csv", io::summary_csv(r));
  io::write_file_atomic(dir / "replications.csv", io::records_csv(r));
  io::write_file_atomic(dir / "manifest.json",
                        manifest("benchmark", cfg, sc.seed, {"summary.csv", "replications.csv"}).dump(2) + "\n");
  for (const auto& s : r.summaries)
    out << method_name(s.method) << " mean_mse " << io::format_double(s.mean_mse) << " sd_mse "
        << io::format_double(s.sd_mse) << " failures " << s.failures << "\n";
  return kExitOk;
}

// {"simulate": {"scenario": {...}, "replication": r}, "seed": s}
inline int cmd_simulate(const std::string& config_path, const std::string& out_dir, const Flags& flags,
                        std::ostream& out) {
  const json cfg = io::parse_json(io::read_file(config_path));
  io::check_keys(cfg, {"simulate", "seed"}, "config");
  if (!cfg.contains("simulate")) throw ParseError("missing key 'simulate' in config");
  const auto& b = cfg.at("simulate");
  io::check_keys(b, {"scenario", "replication"}, "simulate");
  if (!b.contains("scenario")) throw ParseError("missing key 'scenario' in simulate");
  ScenarioConfig sc = io::scenario_from_json(b.at("scenario"));
  sc.seed = resolve_seed(cfg, flags, sc.seed);
  const int rep = io::get_or<int>(b, "replication", 0, "simulate");
  if (rep < 0) throw InvalidOptions("replication must be nonnegative");

  const SimDraw draw = generate(sc, rep);
  Contamination cont = sc.contamination;
  if (cont.kind == ContaminationKind::PEAK) {
    cont.domain_lo = sc.design.ranges[0][0];
    cont.domain_hi = sc.design.ranges[0][1];
  }
  const std::uint64_t rep_seed = derive_seed(sc.seed, static_cast<std::uint64_t>(rep));
  const Dataset train = contaminate(draw.train, cont, derive_seed(rep_seed, 0xC0FFEE));
  std::vector<long long> ids(static_cast<std::size_t>(sc.m));
  std::iota(ids.begin(), ids.end(), 1LL);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  io::write_file_atomic(dir / "train.csv", io::curves_csv(train, ids));
  io::write_file_atomic(dir / "test.csv", io::curves_csv(draw.test, ids, &draw.truth, "f"));
  io::write_file_atomic(dir / "manifest.json", manifest("simulate", cfg, sc.seed, {"train.csv", "test.csv"}).dump(2) + "\n");
  out << "curves " << sc.m << " train_points " << train.total_points() << " test_points " << draw.test.total_points()
      << "\n";
  return kExitOk;
}

/// Parses argv and dispatches; diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Extended t-process regression"};
  app.require_subcommand(1);
  Flags flags;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", flags.seed, "random seed (overrides the config)"); };
  auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", flags.threads, "worker threads (default: ETPR_THREADS, else 1)")->check(CLI::PositiveNumber);
  };

  std::string data, config, out_path, model, query, out_dir, target = "f";
  auto* fit_cmd = app.add_subcommand("fit", "fit a model to curve data");
  fit_cmd->add_option("--data", data, "CSV: curve_id, x_1..x_p, y")->required();
  fit_cmd->add_option("--config", config, "JSON run config")->required();
  fit_cmd->add_option("--out", out_path, "model JSON output")->required();
  fit_cmd->add_option("--level", flags.level, "interval level stored with the model");
  add_seed(fit_cmd);
  add_threads(fit_cmd);

  auto* pred_cmd = app.add_subcommand("predict", "predict at query points");
  pred_cmd->add_option("--model", model, "model JSON from fit")->required();
  pred_cmd->add_option("--query", query, "CSV: curve_id, x_1..x_p")->required();
  pred_cmd->add_option("--out", out_path, "prediction CSV output")->required();
  pred_cmd->add_option("--level", flags.level, "interval level (default: the model's)");
  pred_cmd->add_option("--interval", target, "interval target: f or y")->check(CLI::IsMember({"f", "y"}));
  add_threads(pred_cmd);

  auto* bench_cmd = app.add_subcommand("benchmark", "run a simulation benchmark");
  bench_cmd->add_option("--config", config, "JSON run config")->required();
  bench_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  add_seed(bench_cmd);
  add_threads(bench_cmd);

  auto* sim_cmd = app.add_subcommand("simulate", "generate and write one simulated dataset");
  sim_cmd->add_option("--config", config, "JSON run config")->required();
  sim_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  add_seed(sim_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, ev;
    const int code = app.exit(e, o, ev);
    out << o.str();
    err << ev.str();
    return code == 0 ? kExitOk : kExitError;
  }
  auto* used = app.get_subcommands().front();

  try {
    if (used == fit_cmd) return cmd_fit(data, config, out_path, flags, out);
    if (used == pred_cmd) return cmd_predict(model, query, out_path, target, flags, out);
    if (used == bench_cmd) return cmd_benchmark(config, out_dir, flags, out);
    return cmd_simulate(config, out_dir, flags, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace etpr::cli

#endif  // ETPR_CLI_HPP
