#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("metriplectic_cli_") + info->name());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "metriplectic");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return metriplectic::cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::string out_dir(const std::string& sub = "") const { return "--out-dir=" + (dir_ / sub).string(); }

  json read_json(const std::string& name) const {
    std::ifstream in(dir_ / name);
    return json::parse(in);
  }

  static std::string config(const std::string& name) {
    const char* root = std::getenv("METRIPLECTIC_SOURCE_DIR");
    return std::string(root ? root : ".") + "/configs/" + name;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, VerifyBuiltinPasses) {
  EXPECT_EQ(run({"verify", "--system", "rigid-body", out_dir()}), 0) << err_.str();
  const json r = read_json("verify_report.json");
  EXPECT_TRUE(r["pass"].get<bool>());
  EXPECT_LE(r["m1_max"].get<double>(), 1e-10);
  EXPECT_LE(r["m2_max"].get<double>(), 1e-10);
  EXPECT_TRUE(fs::exists(dir_ / "manifest.json"));
  EXPECT_EQ(read_json("manifest.json")["seed"], 42);
}

TEST_F(CliTest, VerifyConfigPasses) {
  EXPECT_EQ(run({"verify", "--config", config("rigid_body.json"), out_dir()}), 0) << err_.str();
  EXPECT_EQ(run({"verify", "--config", config("conservative_only.json"), out_dir()}), 0) << err_.str();
}

TEST_F(CliTest, VerifyBadCasimirFailsWithPoint) {
  EXPECT_EQ(run({"verify", "--config", config("bad_casimir.json"), out_dir()}), 1);
  const json r = read_json("verify_report.json");
  EXPECT_FALSE(r["pass"].get<bool>());
  EXPECT_EQ(r["failed_condition"], "M1");
  EXPECT_EQ(r["m1_worst_point"].size(), 3u);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({"verify", out_dir()}), 2);
  EXPECT_EQ(run({"verify", "--system", "pendulum", out_dir()}), 2);
  EXPECT_EQ(run({"verify", "--config", "/nonexistent.json", out_dir()}), 2);
  EXPECT_EQ(run({"simulate", "--system", "rigid-body", "--x0", "1,1", out_dir()}), 2);
  EXPECT_EQ(run({"simulate", "--system", "rigid-body", "--x0", "1,a,1", out_dir()}), 2);
  EXPECT_EQ(run({"equilibrium", "--system", "rigid-body", "--point", "1,0", out_dir()}), 2);
  EXPECT_EQ(run({"bogus"}), 2);
  EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(CliTest, EquilibriumReport) {
  EXPECT_EQ(run({"equilibrium", "--system", "rigid-body", "--point", "1,0,0", out_dir()}), 0) << err_.str();
  const json r = read_json("equilibrium_report.json");
  EXPECT_TRUE(r["equilibrium"]["is_xi_pi_equilibrium"].get<bool>());
  EXPECT_TRUE(r["equilibrium"]["is_xi_equilibrium"].get<bool>());
  EXPECT_TRUE(r["lyapunov"]["positive_definite"].get<bool>());
  const auto eig = r["lyapunov"]["eigenvalues"].get<std::vector<double>>();
  ASSERT_EQ(eig.size(), 3u);
  EXPECT_NEAR(eig[0], 1.0 / 6.0, 1e-6);
  EXPECT_NEAR(eig[2], 2.0, 1e-6);
}

TEST_F(CliTest, EquilibriumMinorAxisConfigIsNotDefinite) {
  EXPECT_EQ(run({"equilibrium", "--config", config("rigid_body_minor_axis.json"), "--point", "0,0,1", out_dir()}), 0);
  EXPECT_FALSE(read_json("equilibrium_report.json")["lyapunov"]["positive_definite"].get<bool>());
}

TEST_F(CliTest, SimulateWritesCsvAndIsDeterministic) {
  const std::vector<std::string> base{"simulate", "--system", "rigid-body", "--x0", "1.01,0.05,-0.03",
                                      "--t1", "2", "--h", "0.01", "--analyze"};
  auto a = base, b = base;
  a.push_back(out_dir("a"));
  b.push_back(out_dir("b"));
  ASSERT_EQ(run(a), 0) << err_.str();
  ASSERT_EQ(run(b), 0) << err_.str();
  const std::string csv = slurp(dir_ / "a" / "trajectory.csv");
  EXPECT_EQ(csv, slurp(dir_ / "b" / "trajectory.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x1,x2,x3,H,phiC,entropy_production,dependence_defect");
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 202);

  std::ifstream in(dir_ / "a" / "simulate_summary.json");
  const json s = json::parse(in);
  EXPECT_EQ(s["status"], "completed");
  EXPECT_EQ(s["lasalle"]["monotone_violations"], 0);
}

TEST_F(CliTest, SimulateEscapeExitsThree) {
  EXPECT_EQ(run({"simulate", "--system", "rigid-body", "--field", "conservative", "--x0", "1,0.5,0.5", "--t1", "5",
                 "--escape-radius", "0.1", out_dir()}),
            3);
  std::ifstream in(dir_ / "simulate_summary.json");
  EXPECT_EQ(json::parse(in)["status"], "escaped");
}
