// SPDX-License-Identifier: Apache-2.0
// Drives the hslab executable end to end through a shell.
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "hslab/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int rc = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("hslab_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& json) const {
    const fs::path p = dir / name;
    std::ofstream(p) << json;
    return p;
  }

  Outcome hslab(const std::string& args, const std::string& env = "") const {
    const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" + HSLAB_CLI_PATH + "' " + args + " >'" +
                            o.string() + "' 2>'" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }
};

constexpr const char* kMcDelta = R"({
  "experiment": "delta",
  "model": {"type": "three_halves"},
  "T_grid": [1, 2],
  "method": "mc",
  "mc": {"seed": 11, "n_paths": 3000, "steps_per_unit": 20, "scheme": "euler_log", "richardson": true},
  "output": "mc_delta"
})";

TEST_F(Cli, CsvBytesDoNotDependOnThreadCount) {
  write("mc.json", kMcDelta);
  ASSERT_EQ(hslab("run mc.json --threads 1 --out one").rc, 0);
  ASSERT_EQ(hslab("run mc.json --threads 4 --out four").rc, 0);
  const std::string a = slurp(dir / "one/mc_delta_curve.csv"), b = slurp(dir / "four/mc_delta_curve.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}

TEST_F(Cli, SeedFromEnvironmentOverridesConfig) {
  write("mc.json", kMcDelta);
  std::string seeded = kMcDelta;
  seeded.replace(seeded.find("\"seed\": 11"), 10, "\"seed\": 99");
  write("mc99.json", seeded);
  ASSERT_EQ(hslab("run mc.json --out env", "HSLAB_SEED=99").rc, 0);
  ASSERT_EQ(hslab("run mc99.json --out cfg").rc, 0);
  ASSERT_EQ(hslab("run mc.json --out plain").rc, 0);
  EXPECT_EQ(slurp(dir / "env/mc_delta_curve.csv"), slurp(dir / "cfg/mc_delta_curve.csv"));
  EXPECT_NE(slurp(dir / "env/mc_delta_curve.csv"), slurp(dir / "plain/mc_delta_curve.csv"));

  const auto bad = hslab("run mc.json --out bad", "HSLAB_SEED=12x");
  EXPECT_EQ(bad.rc, 2);
  EXPECT_NE(bad.err.find("HSLAB_SEED"), std::string::npos);
}

TEST_F(Cli, ConfigurationProblemsExitTwoWithTheirCode) {
  const std::pair<const char*, const char*> cases[] = {
      {R"({"experiment":"price","model":{"type":"cir","params":{"sigma":3}},"T_grid":[1],"method":"closed"})",
       "feller-violation"},
      {R"({"experiment":"price","model":{"type":"cir","params":{"xi":-1}},"T_grid":[1],"method":"closed"})",
       "domain-violation"},
      {R"({"experiment":"app","app":{"kind":"entropic-cp1","params":{"eta":10}},"T_grid":[1]})", "portfolio-range"},
      {R"({"experiment":"price","model":{"type":"cir"},"T_grid":[1],"method":"closed","extra":1})", "unknown-key"},
      {R"({"experiment":"price","model":{"type":"cir"},"T_grid":[2,1],"method":"closed"})", "order"},
      {R"({"experiment":"price","model":{"type":"cir"},"T_grid":[1],"method":"mc",
           "mc":{"scheme":"cir_exact","richardson":true}})",
       "incompatible"},
      {R"({"experiment":)", "json-syntax"},
  };
  for (const auto& [json, code] : cases) {
    write("bad.json", json);
    for (const char* sub : {"validate", "run"}) {
      const auto r = hslab(std::string(sub) + " bad.json");
      EXPECT_EQ(r.rc, 2) << sub << " " << json;
      EXPECT_NE(r.err.find(std::string("\"") + code + "\""), std::string::npos) << r.err;
    }
  }
  EXPECT_EQ(hslab("run missing.json").rc, 2);
}

TEST_F(Cli, ExactSchemeRunsWithoutRichardsonByDefault) {
  write("hs.json", R"({"experiment":"price","model":{"type":"cir"},"T_grid":[2],"method":"mc",
                       "mc":{"n_paths":2000,"n_steps":1,"scheme":"cir_exact","estimator":"hs"}})");
  const auto r = hslab("run hs.json");
  EXPECT_EQ(r.rc, 0) << r.err;
}

TEST_F(Cli, NumericalFailureExitsThree) {
  write("wild.json", R"({
    "experiment": "delta",
    "model": {"type": "three_halves", "params": {"sigma": 30}},
    "T_grid": [20],
    "method": "mc",
    "mc": {"seed": 1, "n_paths": 2000, "n_steps": 1, "scheme": "euler_log", "richardson": false}
  })");
  const auto r = hslab("run wild.json");
  EXPECT_EQ(r.rc, 3);
  EXPECT_NE(r.err.find("rejection-rate"), std::string::npos) << r.err;
}

TEST_F(Cli, UnwritableOutputExitsOne) {
  write("ok.json", R"({"experiment":"price","model":{"type":"cir"},"T_grid":[1],"method":"closed"})");
  std::ofstream(dir / "blocker") << "x";
  EXPECT_EQ(hslab("run ok.json --out blocker/sub").rc, 1);
}

TEST_F(Cli, DeltaCurveCarriesLimitAndFeedsRateFit) {
  write("delta.json", R"({
    "experiment": "delta",
    "model": {"type": "cir", "params": {"a": 1, "b": 1, "sigma": 1, "q": 1, "xi": 1}},
    "T_grid": {"start": 0.5, "stop": 12, "step": 0.5},
    "method": "closed",
    "output": "out/delta"
  })");
  ASSERT_EQ(hslab("run delta.json").rc, 0);
  const std::string text = slurp(dir / "out/delta_curve.csv");
  const auto rows = hslab::parse_curve_csv(text);
  ASSERT_EQ(rows.size(), 24u);
  // phi = exp(-eta x) with eta solving the Riccati equation (sigma^2/2) eta^2 + a eta - q = 0
  const double eta = std::sqrt(3.0) - 1.0, alpha = std::sqrt(3.0);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.target_limit.has_value());
    EXPECT_NEAR(*r.target_limit, -eta, 1e-15);
    EXPECT_EQ(r.method, "closed");
    EXPECT_FALSE(r.std_error.has_value());
  }
  EXPECT_EQ(hslab::curve_csv(rows), text);

  write("fit.json", R"({"experiment":"ratefit","input_csv":"out/delta_curve.csv","output":"out/fit"})");
  ASSERT_EQ(hslab("run fit.json").rc, 0);
  const std::string summary = slurp(dir / "out/fit_summary.txt");
  const auto at = summary.find("fitted_rate: ");
  ASSERT_NE(at, std::string::npos) << summary;
  const double rate = std::stod(summary.substr(at + 13));
  EXPECT_NEAR(rate / alpha, 1.0, 0.05);
  EXPECT_NE(summary.find("rate_check: PASS"), std::string::npos);
}

TEST_F(Cli, ShippedConfigsValidate) {
  for (const auto& e : fs::directory_iterator(HSLAB_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    const auto r = hslab("validate '" + e.path().string() + "'");
    EXPECT_EQ(r.rc, 0) << e.path() << "\n" << r.err;
    EXPECT_EQ(r.out.rfind("valid: ", 0), 0u) << r.out;
  }
}

TEST_F(Cli, VersionPrints) {
  const auto r = hslab("version");
  EXPECT_EQ(r.rc, 0);
  EXPECT_EQ(r.out.rfind("hslab ", 0), 0u);
}

}  // namespace
