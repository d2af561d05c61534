// Drives the kvsched binary end to end.
#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "kvsched/experiment.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

Result sh(const std::string& args) {
  const std::string cmd = std::string(KVSCHED_BIN) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf;
  while (size_t n = fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kvsched_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
};

TEST_F(CliTest, GenIsSeedDeterministic) {
  for (const char* model : {"all_at_once", "poisson"}) {
    const Result a = sh(std::string("gen --model ") + model + " --seed 5");
    const Result b = sh(std::string("gen --model ") + model + " --seed 5");
    EXPECT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out.find("kvsched.instance"), std::string::npos);
  }
  const Result adv = sh("gen --model adversarial --memory 16 --seed 0");
  EXPECT_EQ(adv.code, 0) << adv.out;
  EXPECT_NE(adv.out.find("\"memory_limit\": 16"), std::string::npos);
}

TEST_F(CliTest, GenRequiresSeedAndSaneRanges) {
  EXPECT_EQ(sh("gen --model poisson").code, 2);
  EXPECT_EQ(sh("gen --seed 1 --count 9 3").code, 2);
  EXPECT_EQ(sh("gen --seed 1 --memory 4 --prompt 1 5").code, 2);
}

TEST_F(CliTest, ValidateThreeWays) {
  const std::string inst4 = write("i4.json", R"({"memory_limit":4,"requests":[
      {"id":0,"arrival":0,"prompt":1,"output":1},{"id":1,"arrival":0,"prompt":1,"output":1}]})");
  const std::string inst3 = write("i3.json", R"({"memory_limit":3,"requests":[
      {"id":0,"arrival":0,"prompt":1,"output":1},{"id":1,"arrival":0,"prompt":1,"output":1}]})");
  const std::string empty = write("e.json", R"({"memory_limit":3,"requests":[]})");
  const std::string both = write("s.json", R"({"start":[0,0]})");
  const std::string none = write("n.json", R"({"start":[]})");

  Result r = sh("validate --instance " + inst4 + " --schedule " + both);
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "ok: tel 2\n");
  r = sh("validate --instance " + inst3 + " --schedule " + both);
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.out, "violation: occupancy 4 exceeds limit at round 1\n");
  EXPECT_EQ(sh("validate --instance " + empty + " --schedule " + none).code, 0);
}

TEST_F(CliTest, SolveWritesSchedule) {
  const std::string inst = write("i.json", R"({"memory_limit":4,"requests":[
      {"id":0,"arrival":0,"prompt":1,"output":1},{"id":1,"arrival":0,"prompt":1,"output":2}]})");
  const std::string out = (dir_ / "opt.json").string();
  const Result r = sh("solve --instance " + inst + " --lp --out " + out);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("\"optimal\": true"), std::string::npos);
  EXPECT_NE(r.out.find("\"upper\": 3"), std::string::npos);
  EXPECT_NE(slurp(out).find("[0,0]"), std::string::npos);
}

constexpr const char* kConfig = R"(name = "cli"
trials = 4
seed = 3
compute_hindsight = true

[generator]
model = "poisson"
memory = [10, 14]
prompt = [1, 3]
horizon = [5, 8]

[[policy]]
kind = "mcsf"

[[policy]]
kind = "alpha_beta_clearing"
alpha = 0.2
beta = 0.5

[duration]
kind = "affine"
c0 = 0.05
c1 = 0.001

[output]
memory_timeline = true
throughput = true
)";

TEST_F(CliTest, RunIsByteIdenticalAcrossRuns) {
  const std::string cfg = write("c.toml", kConfig);
  const fs::path a = dir_ / "a", b = dir_ / "b";
  Result r = sh("run --config " + cfg + " --jobs 3 --out " + a.string());
  ASSERT_EQ(r.code, 0) << r.out;
  r = sh("run --config " + cfg + " --jobs 1 --out " + b.string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"results.csv", "summary.json", "memory_timeline.csv",
                        "throughput.csv"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  // The summary is a function of the CSV alone.
  const kvsched::ExperimentConfig c = kvsched::load_config(cfg);
  EXPECT_EQ(kvsched::summary_json(c, kvsched::parse_results_csv(slurp(a / "results.csv"))),
            slurp(a / "summary.json"));
}

TEST_F(CliTest, SeedFlagChangesResults) {
  const std::string cfg = write("c.toml", kConfig);
  ASSERT_EQ(sh("run --config " + cfg + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(sh("run --config " + cfg + " --seed 4 --out " + (dir_ / "b").string()).code, 0);
  EXPECT_NE(slurp(dir_ / "a" / "results.csv"), slurp(dir_ / "b" / "results.csv"));
}

TEST_F(CliTest, TrialFlagReplaysRows) {
  const std::string cfg = write("c.toml", kConfig);
  ASSERT_EQ(sh("run --config " + cfg + " --out " + (dir_ / "all").string()).code, 0);
  ASSERT_EQ(sh("run --config " + cfg + " --trial 2 --out " + (dir_ / "one").string()).code, 0);
  const std::string all = slurp(dir_ / "all" / "results.csv");
  std::istringstream one(slurp(dir_ / "one" / "results.csv"));
  std::string line;
  std::getline(one, line);  // header
  int rows = 0;
  while (std::getline(one, line)) {
    EXPECT_NE(all.find(line + "\n"), std::string::npos) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}

TEST_F(CliTest, InvalidConfigExitsTwoWithLine) {
  std::string text = kConfig;
  text.replace(text.find("horizon"), 7, "horizn");
  const std::string cfg = write("bad.toml", text);
  const Result r = sh("run --config " + cfg);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("line 10: unknown key 'generator.horizn'"), std::string::npos)
      << r.out;
  EXPECT_EQ(sh("run --config " + (dir_ / "missing.toml").string()).code, 2);
  EXPECT_EQ(sh("run").code, 2);
  EXPECT_EQ(sh("frobnicate").code, 2);
}

TEST_F(CliTest, LogLevelFromEnvironment) {
  const std::string cfg = write("c.toml", kConfig);
  const Result r = sh("run --config " + cfg + " --out " + (dir_ / "o").string() +
                      " --trial 0");
  EXPECT_EQ(r.out.find("[info]"), std::string::npos);
  const std::string cmd = "KVSCHED_LOG=info " + std::string(KVSCHED_BIN) + " run --config " +
                          cfg + " --trial 0 --out " + (dir_ / "o").string() + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf;
  while (size_t n = fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
  pclose(p);
  EXPECT_NE(out.find("[info]"), std::string::npos) << out;
}

TEST(BundledConfigTest, AllParse) {
  int seen = 0;
  for (const auto& e : fs::directory_iterator(KVSCHED_CONFIG_DIR)) {
    if (e.path().extension() != ".toml") continue;
    EXPECT_NO_THROW(kvsched::load_config(e.path().string())) << e.path();
    ++seen;
  }
  EXPECT_GE(seen, 2);
}

}  // namespace
