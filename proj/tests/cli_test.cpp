#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "test_support.hpp"

namespace fs = std::filesystem;
using hintseg::test::TempDir;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(HINTSEG_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kQuick =
    " --set epochs=4 --set hint.w=2 --set encoder.stage_channels=4,4,6,8 --set encoder.reduced_channels=3"
    " --set encoder.base_width=4";

}  // namespace

TEST(Cli, StagedCommandsProduceOutputs) {
  TempDir dir("cli");
  const fs::path corpus = dir.path() / "corpus", run = dir.path() / "run", log = dir.path() / "log.txt";
  ASSERT_EQ(run_cli("synth --preset tiny --scenes 3 --out " + corpus.string(), log), 0) << hintseg::test::slurp(log);
  EXPECT_TRUE(fs::exists(corpus / "points.csv"));
  EXPECT_TRUE(fs::exists(corpus / "spec.json"));

  const std::string common = " --corpus " + corpus.string() + " --run " + run.string() + kQuick;
  ASSERT_EQ(run_cli("warmup" + common, log), 0) << hintseg::test::slurp(log);
  EXPECT_TRUE(fs::exists(run / "checkpoints" / "warmup.ckpt"));
  ASSERT_EQ(run_cli("hints" + common, log), 0) << hintseg::test::slurp(log);
  EXPECT_TRUE(fs::exists(run / "hints" / "hints.csv"));
  ASSERT_EQ(run_cli("train" + common + " --until-epoch 3", log), 0) << hintseg::test::slurp(log);
  EXPECT_TRUE(fs::exists(run / "checkpoints" / "main.ckpt"));
  ASSERT_EQ(run_cli("train" + common, log), 0) << hintseg::test::slurp(log);
  EXPECT_TRUE(fs::exists(run / "checkpoints" / "final.ckpt"));
  ASSERT_EQ(run_cli("eval" + common, log), 0) << hintseg::test::slurp(log);
  EXPECT_NE(hintseg::test::slurp(log).find("MAE"), std::string::npos);
  EXPECT_TRUE(fs::exists(run / "eval.json"));
  ASSERT_EQ(run_cli("plot --run " + run.string(), log), 0) << hintseg::test::slurp(log);
  EXPECT_TRUE(fs::exists(run / "plots" / "losses.svg"));

  // predictions written by eval can be scored directly
  const fs::path run2 = dir.path() / "run2";
  ASSERT_EQ(run_cli("eval --corpus " + corpus.string() + " --run " + run2.string() + " --predictions " +
                        (run / "predictions").string(),
                    log),
            0)
      << hintseg::test::slurp(log);
}

TEST(Cli, StagedAndOneShotLossesAgree) {
  TempDir dir("cli_agree");
  const fs::path corpus = dir.path() / "corpus", log = dir.path() / "log.txt";
  ASSERT_EQ(run_cli("synth --preset tiny --scenes 3 --out " + corpus.string(), log), 0);
  const fs::path a = dir.path() / "a", b = dir.path() / "b";
  ASSERT_EQ(run_cli("run --corpus " + corpus.string() + " --run " + a.string() + kQuick, log), 0)
      << hintseg::test::slurp(log);
  const std::string common = " --corpus " + corpus.string() + " --run " + b.string() + kQuick;
  ASSERT_EQ(run_cli("warmup" + common, log), 0);
  ASSERT_EQ(run_cli("hints" + common, log), 0);
  ASSERT_EQ(run_cli("train" + common, log), 0);
  EXPECT_EQ(hintseg::test::slurp(a / "losses.csv"), hintseg::test::slurp(b / "losses.csv"));
}

TEST(Cli, BadInputsFailCleanly) {
  TempDir dir("cli_bad");
  const fs::path log = dir.path() / "log.txt";
  EXPECT_NE(run_cli("", log), 0);
  EXPECT_NE(run_cli("run --corpus /nonexistent --run " + (dir.path() / "r").string(), log), 0);
  ASSERT_EQ(run_cli("synth --preset tiny --scenes 2 --out " + (dir.path() / "c").string(), log), 0);
  EXPECT_NE(run_cli("run --corpus " + (dir.path() / "c").string() + " --run " + (dir.path() / "r").string() +
                        " --set hint.bogus=1",
                    log),
            0);
  EXPECT_NE(hintseg::test::slurp(log).find("hint.bogus"), std::string::npos);
  EXPECT_NE(run_cli("hints --corpus " + (dir.path() / "c").string() + " --run " + (dir.path() / "r").string(), log), 0);
}
