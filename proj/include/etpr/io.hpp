#ifndef ETPR_IO_HPP
#define ETPR_IO_HPP

// CSV ingestion/emission and JSON (de)serialization of configs and models.

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "etpr/errors.hpp"
#include "etpr/estimate.hpp"
#include "etpr/kernels.hpp"
#include "etpr/model.hpp"
#include "etpr/predict.hpp"
#include "etpr/sim.hpp"

namespace etpr::io {

using json = nlohmann::json;

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------- numbers

/// 17 significant digits, '.' decimal point, independent of locale.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------- files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a sibling temporary file and rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file '" + tmp + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename '" + tmp + "' to '" + path.string() + "': " + ec.message());
  }
}

// ---------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<int> lines;  // 1-based source line of each row

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Numeric CSV with a header row. Blank lines are skipped.
inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto cells = split_commas(line);
    if (!have_header) {
      for (auto c : cells) {
        std::string s(c);
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        t.header.push_back(s);
      }
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()),
                       lineno);
    std::vector<double> row;
    row.reserve(cells.size());
    int col = 1;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto v = parse_double(cells[k]);
      if (!v) throw ParseError("field '" + t.header[k] + "' is not a number: '" + std::string(cells[k]) + "'", lineno, col);
      row.push_back(*v);
      col += static_cast<int>(cells[k].size()) + 1;
    }
    t.rows.push_back(std::move(row));
    t.lines.push_back(lineno);
  }
  if (!have_header) throw ParseError("CSV file is empty (no header)");
  return t;
}

// Columns x_1..x_p in order; p inferred from the header.
inline std::vector<int> x_columns(const CsvTable& t) {
  std::vector<int> cols;
  for (int l = 1;; ++l) {
    const int c = t.column("x_" + std::to_string(l));
    if (c < 0) break;
    cols.push_back(c);
  }
  for (const auto& h : t.header)
    if (h.rfind("x_", 0) == 0 && std::find_if(cols.begin(), cols.end(), [&](int c) { return t.header[static_cast<std::size_t>(c)] == h; }) == cols.end())
      throw ParseError("covariate column '" + h + "' is out of sequence (expected x_1..x_p)");
  if (cols.empty()) throw ParseError("missing required column 'x_1'");
  return cols;
}

inline long long curve_id_of(double v, int line, int col) {
  if (std::floor(v) != v || std::abs(v) > 9e15) throw ParseError("curve_id must be an integer", line, col);
  return static_cast<long long>(v);
}

struct CurveFile {
  Dataset data;
  std::vector<long long> curve_ids;  // id of data.curves[i], ascending
};

/// curve_id, x_1..x_p, y. Curves are ordered by ascending curve_id; rows keep
/// file order within a curve.
inline CurveFile parse_curves_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  const int cid = t.column("curve_id");
  if (cid < 0) throw ParseError("missing required column 'curve_id'");
  const int cy = t.column("y");
  if (cy < 0) throw ParseError("missing required column 'y'");
  const auto xc = x_columns(t);
  std::map<long long, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    groups[curve_id_of(t.rows[r][static_cast<std::size_t>(cid)], t.lines[r], cid + 1)].push_back(r);
  if (groups.empty()) throw ParseError("data file has no rows");
  CurveFile out;
  out.data.input_dim = static_cast<int>(xc.size());
  for (const auto& [id, rows] : groups) {
    Curve c{Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(xc.size())),
            Vector(static_cast<Eigen::Index>(rows.size()))};
    for (std::size_t k = 0; k < rows.size(); ++k) {
      for (std::size_t l = 0; l < xc.size(); ++l)
        c.x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = t.rows[rows[k]][static_cast<std::size_t>(xc[l])];
      c.y(static_cast<Eigen::Index>(k)) = t.rows[rows[k]][static_cast<std::size_t>(cy)];
    }
    out.data.curves.push_back(std::move(c));
    out.curve_ids.push_back(id);
  }
  return out;
}

struct QueryFile {
  int input_dim = 0;
  std::vector<long long> curve_ids;
  Matrix x;
  std::vector<int> lines;
};

/// curve_id, x_1..x_p; may have no rows.
inline QueryFile parse_query_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  const int cid = t.column("curve_id");
  if (cid < 0) throw ParseError("missing required column 'curve_id'");
  const auto xc = x_columns(t);
  QueryFile q;
  q.input_dim = static_cast<int>(xc.size());
  q.x.resize(static_cast<Eigen::Index>(t.rows.size()), q.input_dim);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    q.curve_ids.push_back(curve_id_of(t.rows[r][static_cast<std::size_t>(cid)], t.lines[r], cid + 1));
    for (std::size_t l = 0; l < xc.size(); ++l)
      q.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(l)) = t.rows[r][static_cast<std::size_t>(xc[l])];
  }
  q.lines = t.lines;
  return q;
}

inline std::string curves_csv(const Dataset& d, const std::vector<long long>& ids,
                              const std::vector<Vector>* extra = nullptr, const char* extra_name = nullptr) {
  std::string s = "curve_id";
  for (int l = 1; l <= d.input_dim; ++l) s += ",x_" + std::to_string(l);
  s += ",y";
  if (extra) s += std::string(",") + extra_name;
  s += "\n";
  for (std::size_t i = 0; i < d.curves.size(); ++i) {
    const auto& c = d.curves[i];
    for (Eigen::Index j = 0; j < c.y.size(); ++j) {
      s += std::to_string(ids[i]);
      for (Eigen::Index l = 0; l < c.x.cols(); ++l) s += "," + format_double(c.x(j, l));
      s += "," + format_double(c.y(j));
      if (extra) s += "," + format_double((*extra)[i](j));
      s += "\n";
    }
  }
  return s;
}

// ---------------------------------------------------------------- JSON

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    const auto pos = msg.find("syntax error");
    throw ParseError("malformed JSON: " + (pos == std::string::npos ? msg : msg.substr(pos)), line, col);
  }
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ParseError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

template <typename T>
T get_req(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError("missing key '" + std::string(key) + "' in " + where);
  return get_or<T>(j, key, T{}, where);
}

// ν may be +inf, which JSON numbers cannot carry.
inline json nu_to_json(double nu) { return std::isinf(nu) ? json("inf") : json(nu); }
inline double nu_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return kNuInfinity;
  if (j.is_number()) return j.get<double>();
  throw ParseError("nu must be a number or \"inf\"");
}

inline json to_json(const KernelConfig& k) {
  json terms = json::array();
  for (const auto& t : k.terms()) {
    json jt{{"family", std::string(family_name(t.family))}, {"params", t.params}};
    if (t.family == KernelFamily::MATERN) jt["matern_order"] = t.matern_order;
    terms.push_back(jt);
  }
  return json{{"input_dim", k.input_dim()}, {"terms", terms}};
}

/// {"input_dim": p, "terms": [{"family": "SE", "params": [...]}, ...]}.
/// "params" may be omitted for unit starting values.
inline KernelConfig kernel_from_json(const json& j, std::optional<int> input_dim = std::nullopt) {
  check_keys(j, {"input_dim", "terms"}, "kernel");
  const int p = j.contains("input_dim") ? get_req<int>(j, "input_dim", "kernel")
                                        : input_dim.value_or(0);
  if (p < 1) throw ParseError("kernel.input_dim is required and must be at least 1");
  if (input_dim && *input_dim != p)
    throw ParseError("kernel.input_dim = " + std::to_string(p) + " does not match data dimension " +
                     std::to_string(*input_dim));
  if (!j.contains("terms") || !j.at("terms").is_array() || j.at("terms").empty())
    throw ParseError("kernel.terms must be a non-empty array");
  std::vector<KernelTerm> terms;
  for (const auto& jt : j.at("terms")) {
    check_keys(jt, {"family", "params", "matern_order"}, "kernel term");
    const auto name = get_req<std::string>(jt, "family", "kernel term");
    const auto fam = parse_family(name);
    if (!fam) throw ParseError("unknown kernel family '" + name + "' (expected SE, LIN, VM, RQ or MATERN)");
    KernelTerm t{*fam, {}, get_or<double>(jt, "matern_order", 1.5, "kernel term")};
    t.params = jt.contains("params") ? get_req<std::vector<double>>(jt, "params", "kernel term")
                                     : std::vector<double>(static_cast<std::size_t>(family_param_count(*fam, p)), 1.0);
    terms.push_back(std::move(t));
  }
  try {
    return KernelConfig(std::move(terms), p);
  } catch (const Error& e) {
    throw ParseError(std::string("invalid kernel: ") + e.what());
  }
}

inline json to_json(const FitOptions& o) {
  json j{{"mode", o.mode == FitMode::GPR ? "GPR" : "ETPR"},
         {"nu", {{"policy", o.nu_policy.estimated() ? "estimate" : "fixed"}, {"value", o.nu_policy.value}}},
         {"max_iterations", o.max_iterations},
         {"gradient_tolerance", o.gradient_tolerance},
         {"restarts", o.restarts},
         {"tie", o.tie}};
  if (o.initial_phi) j["initial_phi"] = *o.initial_phi;
  return j;
}

inline FitOptions fit_options_from_json(const json& j) {
  check_keys(j, {"mode", "nu", "max_iterations", "gradient_tolerance", "restarts", "tie", "initial_phi"}, "fit");
  FitOptions o;
  const auto mode = get_or<std::string>(j, "mode", "ETPR", "fit");
  if (mode == "ETPR" || mode == "eTPR") o.mode = FitMode::ETPR;
  else if (mode == "GPR") o.mode = FitMode::GPR;
  else throw ParseError("fit.mode must be \"ETPR\" or \"GPR\"");
  if (j.contains("nu")) {
    const auto& jn = j.at("nu");
    check_keys(jn, {"policy", "value"}, "fit.nu");
    const auto pol = get_or<std::string>(jn, "policy", "fixed", "fit.nu");
    if (pol == "fixed") o.nu_policy = NuPolicy::fixed(get_or<double>(jn, "value", 1.05, "fit.nu"));
    else if (pol == "estimate") o.nu_policy = NuPolicy::estimate(get_or<double>(jn, "value", 3.0, "fit.nu"));
    else throw ParseError("fit.nu.policy must be \"fixed\" or \"estimate\"");
  }
  o.max_iterations = get_or<int>(j, "max_iterations", o.max_iterations, "fit");
  o.gradient_tolerance = get_or<double>(j, "gradient_tolerance", o.gradient_tolerance, "fit");
  o.restarts = get_or<int>(j, "restarts", o.restarts, "fit");
  o.tie = get_or<bool>(j, "tie", o.tie, "fit");
  if (j.contains("initial_phi")) o.initial_phi = get_req<double>(j, "initial_phi", "fit");
  return o;
}

inline json to_json(const ModelParams& p) {
  json ks = json::array();
  for (const auto& k : p.kernels()) ks.push_back(to_json(k));
  return json{{"phi", p.phi()}, {"nu", nu_to_json(p.nu())}, {"kernels", ks}};
}

inline ModelParams params_from_json(const json& j) {
  check_keys(j, {"phi", "nu", "kernels"}, "params");
  std::vector<KernelConfig> ks;
  if (!j.contains("kernels") || !j.at("kernels").is_array()) throw ParseError("params.kernels must be an array");
  for (const auto& jk : j.at("kernels")) ks.push_back(kernel_from_json(jk));
  if (!j.contains("nu")) throw ParseError("missing key 'nu' in params");
  try {
    return ModelParams(get_req<double>(j, "phi", "params"), std::move(ks), nu_from_json(j.at("nu")));
  } catch (const Error& e) {
    throw ParseError(std::string("invalid model parameters: ") + e.what());
  }
}

inline json to_json(const FittedModel& fm, const std::vector<long long>& curve_ids, double interval_level) {
  json se = nullptr;
  const auto names = fm.params.beta_names();
  if (fm.std_errors) {
    se = json::object();
    for (std::size_t k = 0; k < names.size(); ++k) se[names[k]] = (*fm.std_errors)(static_cast<Eigen::Index>(k));
  }
  json curves = json::array();
  for (std::size_t i = 0; i < fm.data.curves.size(); ++i) {
    const auto& c = fm.data.curves[i];
    json xs = json::array();
    for (Eigen::Index r = 0; r < c.x.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index l = 0; l < c.x.cols(); ++l) row.push_back(c.x(r, l));
      xs.push_back(row);
    }
    curves.push_back({{"curve_id", curve_ids[i]}, {"x", xs}, {"y", std::vector<double>(c.y.data(), c.y.data() + c.y.size())}});
  }
  json s1 = json::array(), s0 = json::array();
  for (const auto& c : fm.caches) {
    s1.push_back(c.s1);
    s0.push_back(c.s0);
  }
  return json{{"schema_version", kModelSchemaVersion},
              {"params", to_json(fm.params)},
              {"beta_names", names},
              {"log_likelihood", fm.log_likelihood},
              {"converged", fm.converged},
              {"final_gradient_norm", fm.final_gradient_norm},
              {"iterations", fm.iterations},
              {"best_restart", fm.best_restart},
              {"failed_restarts", fm.failed_restarts},
              {"std_errors", se},
              {"s1", s1},
              {"s0", s0},
              {"warnings", fm.warnings},
              {"fit", to_json(fm.options)},
              {"seed", fm.options.seed},
              {"interval_level", interval_level},
              {"training", {{"input_dim", fm.data.input_dim}, {"curves", curves}}}};
}

struct LoadedModel {
  Model model;
  std::vector<long long> curve_ids;
  double interval_level = 0.95;
};

/// Rebuilds parameters, training data and caches from a model document.
inline LoadedModel model_from_json(const json& j) {
  check_keys(j, {"schema_version", "params", "beta_names", "log_likelihood", "converged", "final_gradient_norm",
                 "iterations", "best_restart", "failed_restarts", "std_errors", "s1", "s0", "warnings", "fit", "seed",
                 "interval_level", "training"},
             "model");
  const int ver = get_req<int>(j, "schema_version", "model");
  if (ver != kModelSchemaVersion) throw ParseError("unsupported model schema_version " + std::to_string(ver));
  if (!j.contains("params")) throw ParseError("missing key 'params' in model");
  ModelParams params = params_from_json(j.at("params"));
  if (!j.contains("training")) throw ParseError("missing key 'training' in model");
  const auto& jt = j.at("training");
  check_keys(jt, {"input_dim", "curves"}, "model.training");
  Dataset d;
  d.input_dim = get_req<int>(jt, "input_dim", "model.training");
  std::vector<long long> ids;
  for (const auto& jc : jt.at("curves")) {
    check_keys(jc, {"curve_id", "x", "y"}, "model.training curve");
    ids.push_back(get_req<long long>(jc, "curve_id", "model.training curve"));
    const auto xs = get_req<std::vector<std::vector<double>>>(jc, "x", "model.training curve");
    const auto ys = get_req<std::vector<double>>(jc, "y", "model.training curve");
    Curve c{Matrix(static_cast<Eigen::Index>(xs.size()), d.input_dim), Vector(static_cast<Eigen::Index>(ys.size()))};
    for (std::size_t r = 0; r < xs.size(); ++r) {
      if (static_cast<int>(xs[r].size()) != d.input_dim) throw ParseError("model.training row has wrong dimension");
      for (int l = 0; l < d.input_dim; ++l) c.x(static_cast<Eigen::Index>(r), l) = xs[r][static_cast<std::size_t>(l)];
    }
    for (std::size_t r = 0; r < ys.size(); ++r) c.y(static_cast<Eigen::Index>(r)) = ys[r];
    d.curves.push_back(std::move(c));
  }
  return LoadedModel{Model::make(std::move(d), std::move(params)), std::move(ids),
                     get_or<double>(j, "interval_level", 0.95, "model")};
}

// ---------------------------------------------------------------- scenarios

inline std::string contamination_name(ContaminationKind k) {
  switch (k) {
    case ContaminationKind::NONE: return "NONE";
    case ContaminationKind::GAUSS_AT_POINT: return "GAUSS_AT_POINT";
    case ContaminationKind::CONSTANT_AT_POINT: return "CONSTANT_AT_POINT";
    case ContaminationKind::T_ERROR: return "T_ERROR";
    case ContaminationKind::PEAK: return "PEAK";
  }
  return "NONE";
}

inline ScenarioConfig scenario_from_json(const json& j) {
  const std::string w = "scenario";
  check_keys(j, {"case_id", "m", "n", "p", "theta_true", "phi_true", "design", "contamination", "replications", "seed",
                 "case_nu", "case_omega", "fit_kernel", "fixed_nu", "restarts", "max_iterations", "gradient_tolerance"},
             w);
  ScenarioConfig c;
  c.case_id = get_or<int>(j, "case_id", c.case_id, w);
  c.m = get_or<int>(j, "m", c.m, w);
  c.n = get_or<int>(j, "n", c.n, w);
  c.p = get_or<int>(j, "p", c.p, w);
  c.theta_true = get_or<std::vector<double>>(j, "theta_true", c.theta_true, w);
  c.phi_true = get_or<double>(j, "phi_true", c.phi_true, w);
  c.design.ranges.assign(static_cast<std::size_t>(std::max(c.p, 1)), {0.0, 3.0});
  if (j.contains("design")) {
    const auto& jd = j.at("design");
    const std::string wd = "scenario.design";
    check_keys(jd, {"kind", "ranges", "grid_size", "train_rule", "dense_count"}, wd);
    const auto kind = get_or<std::string>(jd, "kind", "EVEN_GRID", wd);
    if (kind == "EVEN_GRID") c.design.kind = DesignKind::EVEN_GRID;
    else if (kind == "RANDOM_SUBSET") c.design.kind = DesignKind::RANDOM_SUBSET;
    else throw ParseError("design.kind must be EVEN_GRID or RANDOM_SUBSET");
    if (jd.contains("ranges")) {
      c.design.ranges.clear();
      for (const auto& r : get_req<std::vector<std::vector<double>>>(jd, "ranges", wd)) {
        if (r.size() != 2) throw ParseError("design.ranges entries must be [lo, hi]");
        c.design.ranges.push_back({r[0], r[1]});
      }
    }
    c.design.grid_size = get_or<int>(jd, "grid_size", c.design.grid_size, wd);
    c.design.train_rule = get_or<std::string>(jd, "train_rule", c.design.train_rule, wd);
    c.design.dense_count = get_or<int>(jd, "dense_count", c.design.dense_count, wd);
  }
  if (j.contains("contamination")) {
    const auto& jc = j.at("contamination");
    const std::string wc = "scenario.contamination";
    check_keys(jc, {"kind", "index", "variance", "delta", "df", "count", "probability", "amplitude", "width", "start",
                    "sign"},
               wc);
    const auto kind = get_or<std::string>(jc, "kind", "NONE", wc);
    bool found = false;
    for (auto k : {ContaminationKind::NONE, ContaminationKind::GAUSS_AT_POINT, ContaminationKind::CONSTANT_AT_POINT,
                   ContaminationKind::T_ERROR, ContaminationKind::PEAK})
      if (kind == contamination_name(k)) {
        c.contamination.kind = k;
        found = true;
      }
    if (!found) throw ParseError("unknown contamination kind '" + kind + "'");
    auto& ct = c.contamination;
    if (jc.contains("index")) ct.index = get_req<int>(jc, "index", wc);
    ct.variance = get_or<double>(jc, "variance", ct.variance, wc);
    ct.delta = get_or<double>(jc, "delta", ct.delta, wc);
    ct.df = get_or<double>(jc, "df", ct.df, wc);
    ct.count = get_or<int>(jc, "count", ct.count, wc);
    ct.probability = get_or<double>(jc, "probability", ct.probability, wc);
    ct.amplitude = get_or<double>(jc, "amplitude", ct.amplitude, wc);
    ct.width = get_or<double>(jc, "width", ct.width, wc);
    if (jc.contains("start")) ct.start = get_req<double>(jc, "start", wc);
    if (jc.contains("sign")) ct.sign = get_req<double>(jc, "sign", wc);
  }
  c.replications = get_or<int>(j, "replications", c.replications, w);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, w);
  c.case_nu = get_or<double>(j, "case_nu", c.case_nu, w);
  c.case_omega = get_or<double>(j, "case_omega", c.case_omega, w);
  if (j.contains("fit_kernel")) c.fit_kernel = kernel_from_json(j.at("fit_kernel"), c.p);
  c.fixed_nu = get_or<double>(j, "fixed_nu", c.fixed_nu, w);
  c.restarts = get_or<int>(j, "restarts", c.restarts, w);
  c.max_iterations = get_or<int>(j, "max_iterations", c.max_iterations, w);
  c.gradient_tolerance = get_or<double>(j, "gradient_tolerance", c.gradient_tolerance, w);
  try {
    c.validate();
  } catch (const InvalidOptions& e) {
    throw ParseError(std::string("invalid scenario: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------- outputs

struct PredictionRow {
  long long curve_id;
  Vector u;
  Prediction p;
};

inline std::string predictions_csv(const std::vector<PredictionRow>& rows, int input_dim) {
  std::string s = "curve_id";
  for (int l = 1; l <= input_dim; ++l) s += ",u_" + std::to_string(l);
  s += ",mean,f_var,y_var,s0,lower,upper\n";
  for (const auto& r : rows) {
    s += std::to_string(r.curve_id);
    for (Eigen::Index l = 0; l < r.u.size(); ++l) s += "," + format_double(r.u(l));
    for (double v : {r.p.mean, r.p.f_variance, r.p.y_variance, r.p.s0, r.p.lower, r.p.upper}) s += "," + format_double(v);
    s += "\n";
  }
  return s;
}

inline std::string summary_csv(const BenchResult& r) {
  std::string s = "method,mean_mse,sd_mse,n_fail,n_ok,n_not_converged\n";
  for (const auto& m : r.summaries)
    s += method_name(m.method) + "," + format_double(m.mean_mse) + "," + format_double(m.sd_mse) + "," +
         std::to_string(m.failures) + "," + std::to_string(m.replications) + "," + std::to_string(m.not_converged) + "\n";
  return s;
}

inline std::string records_csv(const BenchResult& r) {
  std::string s = "replication,seed,method,failed,converged,mse,nu,log_likelihood,error\n";
  for (const auto& rec : r.records) {
    std::string err = rec.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    s += std::to_string(rec.replication) + "," + std::to_string(rec.seed) + "," + method_name(rec.method) + "," +
         (rec.failed ? "1" : "0") + "," + (rec.converged ? "1" : "0") + "," + format_double(rec.mse) + "," +
         format_double(rec.nu) + "," + format_double(rec.log_likelihood) + "," + err + "\n";
  }
  return s;
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

}  // namespace etpr::io

#endif  // ETPR_IO_HPP
