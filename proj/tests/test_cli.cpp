#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "etpr/cli.hpp"
#include "test_util.hpp"

#ifndef ETPR_CLI_PATH
#define ETPR_CLI_PATH "etpr"
#endif

using namespace etpr;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("etpr_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
    return path(name);
  }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "etpr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  // Two curves (ids 7 and 3) drawn from the Gaussian model.
  std::string curves_file() const {
    ScenarioConfig sc;
    sc.m = 2;
    sc.n = 12;
    sc.theta_true = {1.0, 2.0, 0.1};
    sc.seed = 4;
    return write("data.csv", io::curves_csv(generate(sc, 0).train, {7, 3}));
  }

  static std::string read(const std::string& p) { return io::read_file(p); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const char* kFitConfig = R"({"kernel": {"input_dim": 1, "terms": [{"family": "SE"}, {"family": "LIN"}]},
  "fit": {"nu": {"policy": "fixed", "value": 2.0}, "restarts": 2}, "seed": 11})";

json bench_config(int reps, std::uint64_t seed) {
  return json{{"benchmark",
               {{"scenario",
                 {{"m", 2}, {"n", 8}, {"design", {{"grid_size", 20}}}, {"replications", reps}, {"restarts", 1}}},
                {"methods", {"GPR", "eTPR", "oracle"}}}},
              {"seed", seed}};
}

}  // namespace

TEST_F(CliTest, FitWritesReadableModel) {
  const auto data = curves_file();
  const auto cfg = write("cfg.json", kFitConfig);
  ASSERT_EQ(run({"fit", "--data", data, "--config", cfg, "--out", path("model.json")}), 0) << err_.str();
  const json m = json::parse(read(path("model.json")));
  EXPECT_EQ(m.at("schema_version"), 1);
  EXPECT_EQ(m.at("seed"), 11);
  EXPECT_TRUE(m.at("converged").get<bool>());
  EXPECT_EQ(m.at("training").at("curves")[0].at("curve_id"), 3);
  const auto lm = io::model_from_json(m);
  EXPECT_EQ(lm.curve_ids, (std::vector<long long>{3, 7}));
  EXPECT_EQ(lm.model.params.nu(), 2.0);
  EXPECT_EQ(lm.model.log_likelihood(), m.at("log_likelihood").get<double>());
  EXPECT_FALSE(fs::exists(path("model.json.tmp")));
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
  const auto data = curves_file();
  const auto cfg = write("cfg.json", kFitConfig);
  ASSERT_EQ(run({"fit", "--data", data, "--config", cfg, "--out", path("m.json"), "--seed", "99"}), 0);
  EXPECT_EQ(json::parse(read(path("m.json"))).at("seed"), 99);
}

TEST_F(CliTest, MissingColumnIsNamed) {
  const auto data = write("bad.csv", "curve_id,x_1\n1,0.5\n");
  const auto cfg = write("cfg.json", kFitConfig);
  EXPECT_EQ(run({"fit", "--data", data, "--config", cfg, "--out", path("m.json")}), 1);
  EXPECT_NE(err_.str().find("missing required column 'y'"), std::string::npos) << err_.str();
  EXPECT_FALSE(fs::exists(path("m.json")));
}

TEST_F(CliTest, SingleCurveNuEstimationRejected) {
  ScenarioConfig sc;
  const auto data = write("one.csv", io::curves_csv(generate(sc, 0).train, {1}));
  const auto cfg = write("cfg.json", R"({"fit": {"nu": {"policy": "estimate"}}})");
  EXPECT_EQ(run({"fit", "--data", data, "--config", cfg, "--out", path("m.json")}), 1);
  EXPECT_NE(err_.str().find("m = 1"), std::string::npos) << err_.str();
}

TEST_F(CliTest, MalformedJsonReportsPosition) {
  const auto data = curves_file();
  const auto cfg = write("cfg.json", "{\n  \"seed\": 3,\n  \"fit\": {,}\n}\n");
  EXPECT_EQ(run({"fit", "--data", data, "--config", cfg, "--out", path("m.json")}), 1);
  EXPECT_NE(err_.str().find("line 3"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("column"), std::string::npos) << err_.str();
  const auto unknown = write("u.json", R"({"sed": 3})");
  EXPECT_EQ(run({"fit", "--data", data, "--config", unknown, "--out", path("m.json")}), 1);
  EXPECT_NE(err_.str().find("sed"), std::string::npos) << err_.str();
}

TEST_F(CliTest, PredictMatchesInProcess) {
  const auto data = curves_file();
  const auto cfg = write("cfg.json", kFitConfig);
  ASSERT_EQ(run({"fit", "--data", data, "--config", cfg, "--out", path("model.json")}), 0);
  const auto query = write("q.csv", "curve_id,x_1\n7,2.5\n3,0.25\n7,-0.5\n3,1.75\n");
  ASSERT_EQ(run({"predict", "--model", path("model.json"), "--query", query, "--out", path("p.csv"), "--level", "0.9"}),
            0)
      << err_.str();

  const auto cf = io::parse_curves_csv(read(data));
  FitOptions o = io::fit_options_from_json(json::parse(kFitConfig).at("fit"));
  o.seed = 11;
  const auto fm = fit(cf.data, io::kernel_from_json(json::parse(kFitConfig).at("kernel"), 1), o);
  Matrix u3(2, 1), u7(2, 1);
  u3 << 0.25, 1.75;
  u7 << -0.5, 2.5;
  std::vector<io::PredictionRow> rows;
  const auto p3 = predict_f(fm, 0, u3, 0.9), p7 = predict_f(fm, 1, u7, 0.9);
  for (int r = 0; r < 2; ++r) rows.push_back({3, u3.row(r).transpose(), p3[static_cast<std::size_t>(r)]});
  for (int r = 0; r < 2; ++r) rows.push_back({7, u7.row(r).transpose(), p7[static_cast<std::size_t>(r)]});
  EXPECT_EQ(read(path("p.csv")), io::predictions_csv(rows, 1));

  ASSERT_EQ(run({"predict", "--model", path("model.json"), "--query", query, "--out", path("py.csv"), "--interval", "y"}),
            0);
  EXPECT_NE(read(path("py.csv")), read(path("p.csv")));
}

TEST_F(CliTest, PredictEdgeCases) {
  const auto data = curves_file();
  const auto cfg = write("cfg.json", kFitConfig);
  ASSERT_EQ(run({"fit", "--data", data, "--config", cfg, "--out", path("model.json")}), 0);
  const auto empty = write("e.csv", "curve_id,x_1\n");
  ASSERT_EQ(run({"predict", "--model", path("model.json"), "--query", empty, "--out", path("e_out.csv")}), 0);
  EXPECT_EQ(read(path("e_out.csv")), "curve_id,u_1,mean,f_var,y_var,s0,lower,upper\n");
  const auto unknown = write("u.csv", "curve_id,x_1\n3,0.5\n5,0.5\n");
  EXPECT_EQ(run({"predict", "--model", path("model.json"), "--query", unknown, "--out", path("u_out.csv")}), 1);
  EXPECT_NE(err_.str().find("line 3: curve_id 5"), std::string::npos) << err_.str();
  EXPECT_EQ(run({"predict", "--model", path("model.json"), "--query", empty, "--out", path("x.csv"), "--level", "1.5"}),
            1);
  EXPECT_EQ(run({"predict", "--model", path("model.json"), "--query", empty, "--out", path("x.csv"), "--interval", "z"}),
            1);
}

TEST_F(CliTest, BenchmarkIsReproducible) {
  const auto cfg = write("b.json", bench_config(2, 5).dump());
  ASSERT_EQ(run({"benchmark", "--config", cfg, "--out-dir", path("a")}), 0) << err_.str();
  ASSERT_EQ(run({"benchmark", "--config", cfg, "--out-dir", path("b"), "--threads", "2"}), 0);
  for (const char* f : {"summary.csv", "replications.csv", "manifest.json"})
    EXPECT_EQ(read(path(std::string("a/") + f)), read(path(std::string("b/") + f))) << f;
  const auto summary = read(path("a/summary.csv"));
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "method,mean_mse,sd_mse,n_fail,n_ok,n_not_converged");
  EXPECT_NE(summary.find("\noracle,0,0,0,2,0\n"), std::string::npos) << summary;

  const json ma = json::parse(read(path("a/manifest.json")));
  const auto other = write("c.json", bench_config(2, 6).dump());
  ASSERT_EQ(run({"benchmark", "--config", other, "--out-dir", path("c")}), 0);
  const json mc = json::parse(read(path("c/manifest.json")));
  EXPECT_NE(ma.at("config_hash"), mc.at("config_hash"));
  EXPECT_EQ(ma.at("config_hash"), io::fnv1a_hex(bench_config(2, 5).dump()));
  EXPECT_EQ(ma.at("seed"), 5);
}

TEST_F(CliTest, InvalidCaseIdFails) {
  json cfg = bench_config(1, 5);
  cfg["benchmark"]["scenario"]["case_id"] = 9;
  EXPECT_EQ(run({"benchmark", "--config", write("b.json", cfg.dump()), "--out-dir", path("o")}), 1);
  EXPECT_NE(err_.str().find("case"), std::string::npos) << err_.str();
}

TEST_F(CliTest, SparseTailSmokeRunIsQuick) {
  const json scenario{{"case_id", 1},
                      {"m", 1},
                      {"n", 10},
                      {"theta_true", {0.05, 10.0, 0.05}},
                      {"phi_true", 0.1},
                      {"design", {{"ranges", {{0.0, 2.0}}}, {"grid_size", 61}, {"train_rule", "sparse_tail"}, {"dense_count", 46}}},
                      {"contamination", {{"kind", "GAUSS_AT_POINT"}, {"index", -1}, {"variance", 2.0}}},
                      {"fit_kernel", {{"input_dim", 1}, {"terms", {{{"family", "SE"}}, {{"family", "MATERN"}}}}}},
                      {"replications", 2}};
  const json cfg{{"benchmark", {{"scenario", scenario}, {"methods", {"GPR", "eTPR"}}}}, {"seed", 6}};
  const auto t0 = std::chrono::steady_clock::now();
  ASSERT_EQ(run({"benchmark", "--config", write("t.json", cfg.dump()), "--out-dir", path("t")}), 0) << err_.str();
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 60.0);
  EXPECT_NE(read(path("t/summary.csv")).find("\neTPR,"), std::string::npos);
}

TEST_F(CliTest, SimulateWritesTrainAndTest) {
  const json cfg{{"simulate", {{"scenario", {{"m", 3}, {"n", 6}, {"design", {{"grid_size", 15}}}}}, {"replication", 2}}},
                 {"seed", 8}};
  ASSERT_EQ(run({"simulate", "--config", write("s.json", cfg.dump()), "--out-dir", path("s")}), 0) << err_.str();
  const auto train = io::parse_curves_csv(read(path("s/train.csv")));
  EXPECT_EQ(train.curve_ids, (std::vector<long long>{1, 2, 3}));
  ScenarioConfig sc;
  sc.m = 3;
  sc.n = 6;
  sc.design.grid_size = 15;
  sc.seed = 8;
  const auto d = generate(sc, 2);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(train.data.curves[static_cast<std::size_t>(i)].y, d.train.curves[static_cast<std::size_t>(i)].y);
  EXPECT_EQ(read(path("s/test.csv")).substr(0, 19), "curve_id,x_1,y,f\n1,");
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"fit"}), 1);
  EXPECT_EQ(run({"train"}), 1);
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_NE(out_.str().find("benchmark"), std::string::npos);
}

TEST(Threads, EnvironmentFallback) {
  ::unsetenv("ETPR_THREADS");
  EXPECT_EQ(resolve_threads(0), 1);
  ::setenv("ETPR_THREADS", "3", 1);
  EXPECT_EQ(resolve_threads(0), 3);
  EXPECT_EQ(resolve_threads(2), 2);
  ::setenv("ETPR_THREADS", "zero", 1);
  EXPECT_EQ(resolve_threads(0), 1);
  ::unsetenv("ETPR_THREADS");
}

TEST(Binary, RunsAsSubprocess) {
  const std::string bin = ETPR_CLI_PATH;
  if (!fs::exists(bin)) GTEST_SKIP() << "binary not built";
  const std::string cmd = "ETPR_THREADS=2 " + bin + " --help > /dev/null 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_NE(std::system((bin + " nonsense > /dev/null 2>&1").c_str()), 0);
}
