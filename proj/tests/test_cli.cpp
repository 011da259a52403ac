#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ctm/rng.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CTM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ctm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Gaussian rows; rows after `change` are shifted by `shift`.
  fs::path write_data(const std::string& name, std::size_t n, double shift, std::size_t change, std::uint64_t seed) {
    ctm::CounterRng rng(seed);
    const fs::path p = dir_ / name;
    std::ofstream out(p);
    out << "x1,x2,label\n";
    for (std::size_t i = 0; i < n; ++i) {
      const double s = i >= change ? shift : 0.0;
      const double a = rng.normal() + s, b = rng.normal() + s;
      out << a << ',' << b << ',' << a + b << '\n';
    }
    return p;
  }

  fs::path dir_;
};

TEST_F(Cli, SimulateZeroStepsWritesStepZeroOnly) {
  EXPECT_EQ(run_cli("simulate --n-steps 0 --n-paths 1 -o " + (dir_ / "out").string()), 0);
  EXPECT_EQ(slurp(dir_ / "out" / "path_1.csv"), "step,log10_S\n0,0\n");
}

TEST_F(Cli, CalibrateIsByteIdenticalForASeed) {
  const std::string common = "calibrate --quantity cusum-max --n-steps 500 --n-sims 50 --seed 4 --candidates 50 500 ";
  ASSERT_EQ(run_cli(common + "-o " + (dir_ / "a").string()), 0);
  ASSERT_EQ(run_cli(common + "--threads 3 -o " + (dir_ / "b").string()), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "report.json"), slurp(dir_ / "b" / "report.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "maxima.csv"), slurp(dir_ / "b" / "maxima.csv"));
  const auto report = nlohmann::json::parse(slurp(dir_ / "a" / "report.json"));
  EXPECT_EQ(report["quantity"], "cusum_max_percentile");
  EXPECT_EQ(report["candidates"].size(), 2u);
}

TEST_F(Cli, OtherCalibrationQuantities) {
  EXPECT_EQ(run_cli("calibrate --quantity barrier-slope --horizons 100 1000 --n-sims 40 -o " + (dir_ / "b").string()), 0);
  EXPECT_EQ(run_cli("calibrate --quantity sr-lifespan --threshold 50 --n-sims 40 -o " + (dir_ / "s").string()), 0);
  EXPECT_EQ(run_cli("calibrate --quantity jumper-decay --n-steps 1000 --n-sims 40 -o " + (dir_ / "j").string()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "s" / "report.json"));
  EXPECT_EQ(slurp(dir_ / "b" / "maxima.csv").substr(0, 34), "sim,max_ratio_100,max_ratio_1000\n0");
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  const fs::path env_dir = dir_ / "env";
  const std::string cmd = "CTM_OUTPUT_DIR=" + env_dir.string() + " " + CTM_CLI_PATH +
                          " simulate --n-steps 3 --n-paths 1 -o " + (dir_ / "flag").string() + " > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(env_dir / "path_1.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "flag"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("calibrate --quantity nonsense"), 2);
  EXPECT_EQ(run_cli("simulate --bogus-flag"), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("monitor --training " + (dir_ / "missing.csv").string()), 3);
  std::ofstream(dir_ / "bad.json") << R"({"seed": 1, "colour": "red"})";
  EXPECT_EQ(run_cli("simulate --config " + (dir_ / "bad.json").string()), 2);
  std::ofstream(dir_ / "broken.csv") << "x,label\n1,2\n3,oops\n";
  EXPECT_EQ(run_cli("monitor --training " + (dir_ / "broken.csv").string()), 3);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  std::ofstream(dir_ / "cfg.json") << R"({"n_steps": 5, "n_paths": 2, "seed": 1})";
  ASSERT_EQ(run_cli("simulate --config " + (dir_ / "cfg.json").string() + " --n-paths 1 -o " + (dir_ / "o").string()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "path_1.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "o" / "path_2.csv"));
  std::ifstream in(dir_ / "o" / "path_1.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 7);  // header + steps 0..5
}

TEST_F(Cli, MonitorRaisesAlarmAfterInjectedChange) {
  const auto train = write_data("train.csv", 300, 0.0, 300, 1);
  const auto stream = write_data("stream.csv", 600, 3.0, 100, 2);
  const fs::path out = dir_ / "m";
  ASSERT_EQ(run_cli("monitor --training " + train.string() + " --stream " + stream.string() + " -o " + out.string()), 0);
  const auto log = slurp(out / "alarms.jsonl");
  ASSERT_FALSE(log.empty());
  const auto j = nlohmann::json::parse(log.substr(0, log.find('\n')));
  EXPECT_EQ(j["event"]["stage"], "opening");
  EXPECT_EQ(j["event"]["detector"], "ville");
  EXPECT_GT(j["event"]["test_index"].get<int>(), 100);
  EXPECT_GE(j["event"]["firing_folds"].size(), 2u);
  EXPECT_EQ(slurp(out / "trace.csv").substr(0, 38), "step,fold,log10_S,gamma,psi,psi_star\n1");
}

TEST_F(Cli, MonitorReadsStandardInput) {
  const auto train = write_data("train.csv", 300, 0.0, 300, 1);
  const auto stream = write_data("stream.csv", 600, 3.0, 100, 2);
  const std::string cmd = std::string(CTM_CLI_PATH) + " monitor --training " + train.string() + " -o " +
                          (dir_ / "m").string() + " < " + stream.string() + " > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_FALSE(slurp(dir_ / "m" / "alarms.jsonl").empty());
}

TEST_F(Cli, ReplicateWritesDelaysAndPaths) {
  const auto pre = write_data("pre.csv", 700, 0.0, 700, 1);
  const auto post = write_data("post.csv", 400, 2.0, 0, 2);
  const fs::path out = dir_ / "r";
  ASSERT_EQ(run_cli("replicate --pre " + pre.string() + " --post " + post.string() +
                    " --training-size 200 --calibration-size 200 --test-size 200 --n-sims 10 --paths true -o " +
                    out.string()),
            0);
  const auto d = nlohmann::json::parse(slurp(out / "delays.json"));
  EXPECT_EQ(d["results"].size(), 3u);
  for (int k = 1; k <= 3; ++k) {
    for (int s = 0; s < 2; ++s) {
      EXPECT_TRUE(fs::exists(out / ("path_fold" + std::to_string(k) + "_scenario" + std::to_string(s) + ".csv")));
    }
  }
}

TEST_F(Cli, ReplicateFromPredictions) {
  std::ofstream preds(dir_ / "preds.csv");
  std::ofstream data(dir_ / "data.csv");
  preds << "y_hat\n";
  data << "x,label\n";
  ctm::CounterRng rng(3);
  for (int i = 0; i < 600; ++i) {
    const double y = rng.normal();
    preds << 0.0 << '\n';
    data << 0 << ',' << (i < 300 ? y : y + 3.0) << '\n';
  }
  preds.close();
  data.close();
  const fs::path out = dir_ / "p";
  ASSERT_EQ(run_cli("replicate --predictions " + (dir_ / "preds.csv").string() + " --stream " + (dir_ / "data.csv").string() +
                    " --scorer signed --calibration-size 300 -o " + out.string()),
            0);
  const auto d = nlohmann::json::parse(slurp(out / "delays.json"));
  EXPECT_EQ(d["mode"], "predictions");
  EXPECT_FALSE(d["results"][0]["median"].is_null());
  EXPECT_EQ(run_cli("replicate --predictions " + (dir_ / "preds.csv").string() + " --stream " + (dir_ / "data.csv").string() +
                    " --scorer nd -o " + out.string()),
            2);
}

}  // namespace
