#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "support.hpp"

using namespace chcf::testing_support;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& capture = {}) {
  std::string cmd = std::string(CHCF_CLI_PATH) + " " + args;
  cmd += capture.empty() ? " > /dev/null 2>&1" : " > '" + capture.string() + "' 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, '\t');) out.push_back(cell);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    data = dir / "data";
    ASSERT_EQ(run("synth --out " + data.string() +
                  " --users 40 --items 30 --densities 0.3,0.2,0.15 --seed 3"),
              0);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir, data;
};

}  // namespace

TEST(CliBasics, HelpAndUsage) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("train --dataset x"), 1);
}

TEST(CliBasics, VerifyBoundPasses) {
  const fs::path dir = scratch_dir("cli_verify");
  ASSERT_EQ(run("verify-bound --instances 50", dir / "out.txt"), 0);
  const std::string out = slurp(dir / "out.txt");
  EXPECT_NE(out.find("g=linear instances=50 holding=50"), std::string::npos) << out;
  EXPECT_NE(out.find("g=square instances=50 holding=50"), std::string::npos) << out;
  fs::remove_all(dir);
}

TEST(CliBasics, PrepareWritesSplitAndRejectsCorruptLines) {
  const fs::path dir = scratch_dir("cli_prepare");
  std::string log;
  for (int u = 0; u < 4; ++u) {
    for (int v = 0; v < 6; ++v) {
      log += "u" + std::to_string(u) + ",i" + std::to_string(v) + ",view\n";
      log += "u" + std::to_string(u) + ",i" + std::to_string(v) + ",buy\n";
    }
  }
  write(dir / "log.csv", log);
  EXPECT_EQ(run("prepare --input " + (dir / "log.csv").string() + " --out " +
                (dir / "split").string() + " --min-target 1 --behaviors view,buy"),
            0);
  for (const char* f : {"behavior_0.txt", "behavior_1.txt", "validation.txt", "test.txt"}) {
    EXPECT_TRUE(fs::exists(dir / "split" / f)) << f;
  }

  write(dir / "bad.csv", log + "u1,i2,lick\n");
  EXPECT_EQ(run("prepare --input " + (dir / "bad.csv").string() + " --out " +
                (dir / "bad").string() + " --behaviors view,buy"),
            2);
  EXPECT_EQ(run("prepare --input " + (dir / "missing.csv").string() + " --out " +
                (dir / "none").string()),
            2);
  fs::remove_all(dir);
}

TEST_F(Cli, ConfigErrorsExitOne) {
  write(dir / "bad.cfg", "colour = red\n");
  EXPECT_EQ(run("train --dataset " + data.string() + " --config " + (dir / "bad.cfg").string() +
                " --out " + (dir / "r").string()),
            1);
  write(dir / "lambdas.cfg", "lambdas = 0.2, 0.3, 0.4\nepochs = 1\n");
  EXPECT_EQ(run("train --dataset " + data.string() + " --config " +
                (dir / "lambdas.cfg").string() + " --out " + (dir / "r").string()),
            1);
  EXPECT_EQ(run("ablate --dataset " + data.string() + " --variant Q --out " +
                (dir / "r").string()),
            1);
}

TEST_F(Cli, EvaluateRejectsMismatchedCheckpoint) {
  write(dir / "quick.cfg", "epochs = 1\nd = 4\n");
  ASSERT_EQ(run("train --dataset " + data.string() + " --config " + (dir / "quick.cfg").string() +
                " --out " + (dir / "run").string()),
            0);
  EXPECT_EQ(run("evaluate --checkpoint " + (dir / "run" / "checkpoint.txt").string() +
                " --dataset " + data.string() + " --report " + (dir / "again").string()),
            0);
  EXPECT_EQ(slurp(dir / "again.kv"), slurp(dir / "run" / "report.kv"));

  const fs::path other = dir / "other";
  ASSERT_EQ(run("synth --out " + other.string() +
                " --users 41 --items 30 --densities 0.3,0.2,0.15 --seed 3"),
            0);
  EXPECT_EQ(run("evaluate --checkpoint " + (dir / "run" / "checkpoint.txt").string() +
                " --dataset " + other.string()),
            2);
}

TEST_F(Cli, DumpBoundsAtInitialization) {
  write(dir / "zero.cfg", "epochs = 0\nd = 4\n");
  ASSERT_EQ(run("train --dataset " + data.string() + " --config " + (dir / "zero.cfg").string() +
                " --out " + (dir / "run").string()),
            0);
  ASSERT_EQ(run("dump-bounds --checkpoint " + (dir / "run" / "checkpoint.txt").string() +
                    " --users 0,5 --items 1,2,3",
                dir / "dump.tsv"),
            0);
  std::ifstream in(dir / "dump.tsv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "user\titem\tbehavior\tS\tT");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto cells = split_tabs(line);
    ASSERT_EQ(cells.size(), 5u) << line;
    const double s = std::stod(cells[3]);
    const double t = std::stod(cells[4]);
    EXPECT_GE(s, 0.99 * 0.99);
    EXPECT_LE(s, 1.01 * 1.01);
    EXPECT_DOUBLE_EQ(t, 0.5 * s);
    ++rows;
  }
  EXPECT_EQ(rows, 2u * 3u * 3u);
}

TEST_F(Cli, ManifestReplayIsByteIdentical) {
  write(dir / "a.cfg", "epochs = 3\nd = 8\nbatch = 16\nseed = 5\n");
  ASSERT_EQ(run("train --dataset " + data.string() + " --config " + (dir / "a.cfg").string() +
                " --out " + (dir / "first").string()),
            0);
  ASSERT_EQ(run("train --dataset " + data.string() + " --config " +
                (dir / "first" / "manifest.txt").string() + " --out " +
                (dir / "second").string()),
            0);
  for (const char* f : {"checkpoint.txt", "history.tsv", "manifest.txt", "report.kv"}) {
    EXPECT_EQ(slurp(dir / "first" / f), slurp(dir / "second" / f)) << f;
  }

  // A manifest pinned to a different dataset is refused.
  const fs::path other = dir / "other";
  ASSERT_EQ(run("synth --out " + other.string() +
                " --users 40 --items 30 --densities 0.3,0.2,0.15 --seed 4"),
            0);
  EXPECT_EQ(run("train --dataset " + other.string() + " --config " +
                (dir / "first" / "manifest.txt").string() + " --out " + (dir / "third").string()),
            2);
}

TEST_F(Cli, AblateWritesReport) {
  write(dir / "quick.cfg", "epochs = 1\nd = 4\n");
  EXPECT_EQ(run("ablate --dataset " + data.string() + " --variant V --config " +
                (dir / "quick.cfg").string() + " --out " + (dir / "v").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "v" / "report.kv"));
  EXPECT_NE(slurp(dir / "v" / "manifest.txt").find("variant = V"), std::string::npos);
}
