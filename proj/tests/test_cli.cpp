#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           fmt::format("shoggoth_cli_{}", ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome cli(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = fmt::format("env -u SHOGGOTH_SCENARIO_DIR SHOGGOTH_LOG_LEVEL=off '{}' {} >'{}' 2>'{}'",
                                        SHOGGOTH_CLI, args, out.string(), err.string());
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = slurp(out);
    o.err = slurp(err);
    return o;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ValidateShippedScenario) {
  const Outcome o = cli("validate --scenario drift_ab");
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("drift_ab: ok"), std::string::npos);
}

TEST_F(Cli, MissingScenarioIsNotFound) {
  EXPECT_EQ(cli("validate --scenario no_such_scenario").code, 3);
}

TEST_F(Cli, BadPriorIsInvalid) {
  std::string text = slurp(fs::path(SHOGGOTH_TEST_SCENARIOS) / "drift_ab.scn");
  const auto at = text.find("prior = 0.4, 0.3, 0.2, 0.1");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 26, "prior = 0.4, 0.3, 0.2, 0.3");
  const fs::path bad = dir_ / "bad.scn";
  std::ofstream(bad) << text;
  const Outcome o = cli(fmt::format("validate --scenario '{}'", bad.string()));
  EXPECT_EQ(o.code, 4);
  EXPECT_NE(o.err.find("domain.1.prior"), std::string::npos) << o.err;
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(cli("validate --scenario drift_ab --frobnicate").code, 2);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("run").code, 2);
}

TEST_F(Cli, UnknownStrategyIsInvalid) {
  EXPECT_EQ(cli("validate --scenario drift_ab --strategy psychic").code, 4);
}

TEST_F(Cli, EdgeOnlyRunHasNoBandwidth) {
  const Outcome o = cli(fmt::format("run --scenario drift_ab --strategy edge-only --duration-frames 3000 --out '{}'",
                                    dir_.string()));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = lines(slurp(dir_ / "drift_ab-edge-only.csv"));
  ASSERT_EQ(rows.size(), 2u + 10u);
  EXPECT_EQ(rows[0].rfind("# shoggoth-metrics v1", 0), 0u);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    std::vector<std::string> cells;
    std::stringstream ss(rows[i]);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    ASSERT_EQ(cells.size(), 11u);
    EXPECT_EQ(std::stod(cells[7]), 0.0);
    EXPECT_EQ(std::stod(cells[8]), 0.0);
  }
  EXPECT_TRUE(fs::exists(dir_ / "drift_ab-edge-only.sessions.csv"));
}

TEST_F(Cli, SweepWritesOneRowPerRate) {
  const Outcome o = cli(fmt::format(
      "sweep --scenario drift_ab --rates 0.1,0.2,0.4,0.8,1.6,2.0,adaptive --duration-frames 3000 --out '{}'",
      dir_.string()));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = lines(slurp(dir_ / "drift_ab-sweep.csv"));
  ASSERT_EQ(rows.size(), 2u + 7u);
  EXPECT_EQ(rows.back().rfind("adaptive,", 0), 0u);
}

TEST_F(Cli, BadRatesAreInvalid) {
  EXPECT_EQ(cli(fmt::format("sweep --scenario drift_ab --rates 0.1,zoom --out '{}'", dir_.string())).code, 4);
}

TEST_F(Cli, AblateWritesFiveVariants) {
  const Outcome o = cli(fmt::format("ablate --scenario drift_ab --duration-frames 3000 --out '{}'", dir_.string()));
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(lines(slurp(dir_ / "drift_ab-ablation.csv")).size(), 2u + 5u);
}

TEST_F(Cli, EnvironmentOverridesApply) {
  const std::string cmd = fmt::format("SHOGGOTH_STRATEGY=cloud-only SHOGGOTH_DURATION_FRAMES=600 '{}' run "
                                      "--scenario drift_ab --out '{}' >/dev/null 2>&1",
                                      SHOGGOTH_CLI, dir_.string());
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(lines(slurp(dir_ / "drift_ab-cloud-only.csv")).size(), 2u + 2u);
}

TEST_F(Cli, RepeatedRunsAreByteIdentical) {
  const std::string args =
      fmt::format("run --scenario drift_ab --duration-frames 6000 --seed 9 --out '{}'", dir_.string());
  ASSERT_EQ(cli(args).code, 0);
  const std::string first = slurp(dir_ / "drift_ab-shoggoth.csv");
  const std::string first_sessions = slurp(dir_ / "drift_ab-shoggoth.sessions.csv");
  ASSERT_EQ(cli(args).code, 0);
  EXPECT_EQ(slurp(dir_ / "drift_ab-shoggoth.csv"), first);
  EXPECT_EQ(slurp(dir_ / "drift_ab-shoggoth.sessions.csv"), first_sessions);
}
