#include "commands.hpp"

#include <gmock/gmock.h>
#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace glsmul::cli {
namespace {

namespace fs = std::filesystem;
using ::testing::HasSubstr;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("glsmul_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "glsmul");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

const std::vector<std::string> kSmallNet = {"--hidden", "16", "--embedding-dim", "4", "--t-pre", "60"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

TEST_F(CliTest, GenIsReproducible) {
  ASSERT_EQ(cli({"gen", "--scenario", "g1", "--seed", "7", "--out", path("a")}), 0) << err_.str();
  ASSERT_EQ(cli({"gen", "--scenario", "g1", "--seed", "7", "--out", path("b")}), 0);
  for (const char* f : {"source.csv", "target.csv", "oracle.json"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    EXPECT_FALSE(slurp(dir_ / "a" / f).empty());
  }
  const json oracle = json::parse(slurp(dir_ / "a" / "oracle.json"));
  EXPECT_EQ(oracle["version"], kOracleVersion);
  EXPECT_NEAR(oracle["l1_distance"].get<double>(), 0.5333333333333333, 1e-15);
}

TEST_F(CliTest, GenScenariosRecordPriorGap) {
  ASSERT_EQ(cli({"gen", "--scenario", "g2", "--out", path("g2")}), 0);
  EXPECT_EQ(json::parse(slurp(dir_ / "g2" / "oracle.json"))["l1_distance"].get<double>(), 1.0);
  ASSERT_EQ(cli({"gen", "--scenario", "null", "--out", path("null")}), 0);
  EXPECT_EQ(json::parse(slurp(dir_ / "null" / "oracle.json"))["l1_distance"].get<double>(), 0.0);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({"gen", "--scenario", "nope", "--out", path("x")}), 2);
  EXPECT_THAT(err_.str(), HasSubstr("nope"));
  EXPECT_EQ(cli({"train", "--frobnicate"}), 2);
  EXPECT_EQ(cli({}), 2);
  const std::string missing = path("missing_source.csv");
  EXPECT_EQ(cli({"train", "--source", missing, "--target", missing, "--out", path("t")}), 2);
  EXPECT_THAT(err_.str(), HasSubstr(missing));
  EXPECT_EQ(cli({"estimate-shift", "--scenario", "g1", "--checkpoint", path("none.bin"), "--out", path("e")}), 2);
  EXPECT_THAT(err_.str(), HasSubstr("none.bin"));
  EXPECT_EQ(cli({"train", "--scenario", "g1", "--tau", "1.5", "--out", path("t")}), 2);
  EXPECT_EQ(cli({"bench", "--paths", "gpu"}), 2);
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
  std::ofstream(path("cfg.json")) << R"({"scenario": "g1", "t_pre": 5, "t_adapt": 0, "hidden": [8],
                                         "embedding_dim": 3, "seed": 2})";
  ASSERT_EQ(cli({"train", "--config", path("cfg.json"), "--t-pre", "3", "--out", path("run")}), 0) << err_.str();
  const json report = json::parse(slurp(dir_ / "run" / "report.json"));
  EXPECT_EQ(report["config"]["t_pre"], 3);
  EXPECT_EQ(report["config"]["hidden"], json::array({8}));
  EXPECT_EQ(report["config"]["seed"], 2);

  std::ofstream(path("bad.json")) << R"({"scenario": "g1", "learning_rate": 0.1})";
  EXPECT_EQ(cli({"train", "--config", path("bad.json"), "--out", path("run2")}), 2);
  EXPECT_THAT(err_.str(), HasSubstr("learning_rate"));
  std::ofstream(path("broken.json")) << "{";
  EXPECT_EQ(cli({"train", "--config", path("broken.json"), "--out", path("run3")}), 2);
}

TEST_F(CliTest, DegenerateConfigIsSourceOnly) {
  ASSERT_EQ(cli(concat({"train", "--scenario", "g1", "--lambda-tu", "0", "--lambda-du", "0", "--t-adapt", "0",
                        "--out", path("src")},
                       kSmallNet)),
            0)
      << err_.str();
  const json report = json::parse(slurp(dir_ / "src" / "report.json"));
  EXPECT_EQ(report["version"], kReportVersion);
  EXPECT_EQ(report["metrics"]["accuracy"], report["source_only_accuracy"]);
  const std::string trace = slurp(dir_ / "src" / "trace.csv");
  EXPECT_EQ(trace.rfind("epoch,j_e,j_tu,j_du,acc_s,acc_t,n_pseudo\n", 0), 0u);
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 61);

  std::set<std::string> keys;
  for (const auto& [k, v] : report.items()) keys.insert(k);
  EXPECT_EQ(keys, (std::set<std::string>{"version", "config", "source_only_accuracy", "metrics", "shift"}));
  std::set<std::string> metric_keys;
  for (const auto& [k, v] : report["metrics"].items()) metric_keys.insert(k);
  EXPECT_EQ(metric_keys, (std::set<std::string>{"accuracy", "j_b", "j_w", "discriminability",
                                                "prior_error_linf", "prior_error_l1", "d_st"}));
}

TEST_F(CliTest, TrainFromFilesIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(cli({"gen", "--scenario", "g1", "--seed", "3", "--n-source", "150", "--n-target", "150", "--out",
                 path("data")}),
            0);
  auto train = [&](const std::string& out) {
    return cli(concat({"train", "--source", path("data/source.csv"), "--target", path("data/target.csv"),
                       "--t-adapt", "3", "--out", path(out)},
                      kSmallNet));
  };
  ASSERT_EQ(train("r1"), 0) << err_.str();
  ASSERT_EQ(train("r2"), 0) << err_.str();
  for (const char* f : {"trace.csv", "checkpoint.bin", "report.json"}) {
    EXPECT_EQ(slurp(dir_ / "r1" / f), slurp(dir_ / "r2" / f)) << f;
  }
}

TEST_F(CliTest, EstimateShiftOnUnshiftedData) {
  ASSERT_EQ(cli(concat({"train", "--scenario", "null", "--t-adapt", "0", "--out", path("m")}, kSmallNet)), 0)
      << err_.str();
  ASSERT_EQ(cli({"gen", "--scenario", "null", "--seed", "11", "--n-source", "6000", "--n-target", "6000",
                 "--out", path("big")}),
            0);
  ASSERT_EQ(cli({"estimate-shift", "--source", path("big/source.csv"), "--target", path("big/target.csv"),
                 "--checkpoint", path("m/checkpoint.bin"), "--out", path("est")}),
            0)
      << err_.str();
  const json shift = json::parse(slurp(dir_ / "est" / "shift.json"));
  EXPECT_EQ(shift["version"], kShiftVersion);
  for (const json& w : shift["shift"]["w"]) EXPECT_NEAR(w.get<double>(), 1.0, 0.1);
}

TEST_F(CliTest, CorruptCheckpointIsRuntimeFailure) {
  std::ofstream(path("bad.bin")) << "GLSMULCK garbage";
  EXPECT_EQ(cli({"estimate-shift", "--scenario", "g1", "--checkpoint", path("bad.bin"), "--out", path("e")}), 1);
}

TEST_F(CliTest, BenchWoodburyMatchesNaive) {
  ASSERT_EQ(cli({"bench", "--m", "60", "120", "--r", "64", "--out", path("bench.csv")}), 0) << err_.str();
  std::istringstream csv(slurp(dir_ / "bench.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "path,m,r,seconds,max_abs_err");
  int woodbury = 0, rff = 0;
  while (std::getline(csv, line)) {
    const std::string p = line.substr(0, line.find(','));
    const double err = std::stod(line.substr(line.rfind(',') + 1));
    if (p == "woodbury") {
      ++woodbury;
      EXPECT_LT(err, 1e-8);
    }
    if (p == "rff") ++rff;
  }
  EXPECT_EQ(woodbury, 2);
  EXPECT_EQ(rff, 2);
}

}  // namespace
}  // namespace glsmul::cli
