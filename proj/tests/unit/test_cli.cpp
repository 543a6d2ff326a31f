// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "cli/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dropclip::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("dropclip_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string p(const std::string& rel) const { return (dir_ / rel).string(); }

  // Static stage-0 data, a 4-step stage 0, motion data and a 2-epoch
  // post-pretraining run under `tag`.
  void tiny_pipeline(const std::string& tag) {
    ASSERT_EQ(run({"gen-data", "--out", p(tag + "/static"), "--style", "static", "--count", "32",
                   "--eval-count", "8", "--seed", "3"}).code, 0);
    ASSERT_EQ(run({"gen-data", "--out", p(tag + "/motion"), "--count", "32", "--eval-count", "16", "--seed", "4"}).code,
              0);
    const auto s0 = run({"pretrain", "--manifest", p(tag + "/static/train.manifest"), "--out", p(tag + "/s0"),
                         "--steps", "4", "--batch-size", "8", "--warmup", "1"});
    ASSERT_EQ(s0.code, 0) << s0.err;
    const auto post = run({"post-pretrain", "--manifest", p(tag + "/motion/train.manifest"), "--init",
                           p(tag + "/s0/final.ckpt"), "--out", p(tag + "/post"), "--steps", "8", "--batch-size", "8",
                           "--warmup", "2", "--wise-ft", "1,2"});
    ASSERT_EQ(post.code, 0) << post.err;
    EXPECT_NE(post.out.find("post-pretrain: 8 steps, 2 epochs"), std::string::npos) << post.out;
    EXPECT_NE(post.out.find("WiSE-FT applied after epochs: 1 2"), std::string::npos) << post.out;
  }

  fs::path dir_;
};

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, dropclip::cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, dropclip::cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, dropclip::cli::kExitOk);
  EXPECT_EQ(run({"gen-data"}).code, dropclip::cli::kExitUsage);  // --out required
  EXPECT_EQ(run({"gen-data", "--out", "x", "--style", "sideways"}).code, dropclip::cli::kExitUsage);
  EXPECT_EQ(run({"verify", "--filter", "nonsense"}).code, dropclip::cli::kExitUsage);
  EXPECT_EQ(run({"post-pretrain", "--manifest", "m", "--out", "o"}).code, dropclip::cli::kExitUsage);  // no --init
  EXPECT_EQ(run({"wiseft", "d", "--out", "o"}).code, dropclip::cli::kExitUsage);  // neither schedule nor indices
}

TEST(Cli, VerifyOneGroup) {
  const auto r = run({"verify", "--filter", "wiseft"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("3 passed, 0 failed"), std::string::npos) << r.out;
  EXPECT_EQ(r.out.find("numerics/"), std::string::npos);
}

TEST_F(CliTest, UnreadableManifestIsUsageError) {
  const auto r = run({"pretrain", "--manifest", p("absent.manifest"), "--out", p("s0")});
  EXPECT_EQ(r.code, dropclip::cli::kExitUsage);
  EXPECT_NE(r.err.find("absent.manifest"), std::string::npos) << r.err;
}

TEST_F(CliTest, CorruptedFixtureFailsVerify) {
  ASSERT_EQ(run({"verify", "--bless", p("fx")}).code, 0);
  EXPECT_EQ(run({"verify", "--filter", "fixtures", "--fixtures", p("fx")}).code, 0);

  auto bytes = slurp(p("fx/golden.ckpt"));
  bytes[bytes.size() - 3] = static_cast<char>(bytes[bytes.size() - 3] ^ 0x01);
  std::ofstream(p("fx/golden.ckpt"), std::ios::binary | std::ios::trunc) << bytes;

  const auto r = run({"verify", "--filter", "fixtures", "--fixtures", p("fx")});
  EXPECT_EQ(r.code, dropclip::cli::kExitFailure);
  EXPECT_NE(r.out.find("FAIL fixtures/golden_checkpoint_hashes"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("0 passed, 2 failed"), std::string::npos) << r.out;
}

TEST_F(CliTest, WiseFtNeedsTwoSnapshots) {
  fs::create_directories(p("run"));
  ASSERT_EQ(run({"verify", "--bless", p("fx")}).code, 0);
  fs::copy_file(p("fx/golden.ckpt"), p("run/theta_000.ckpt"));
  const auto r = run({"wiseft", p("run"), "--indices", "0", "--out", p("out.ckpt")});
  EXPECT_EQ(r.code, dropclip::cli::kExitFailure);
  EXPECT_NE(r.err.find("holds 1 snapshot(s)"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(p("out.ckpt")));
}

TEST_F(CliTest, TinyPipelineIsReproducible) {
  tiny_pipeline("a");
  tiny_pipeline("b");
  for (const char* f : {"s0/final.ckpt", "post/final.ckpt", "post/theta_001.ckpt", "post/metrics.log"}) {
    EXPECT_EQ(slurp(p(std::string("a/") + f)), slurp(p(std::string("b/") + f))) << f;
  }
  EXPECT_FALSE(fs::exists(p("a/post/.lock")));

  for (const char* tag : {"a", "b"}) {
    const std::string t(tag);
    const auto r = run({"eval", "--checkpoint", p(t + "/post/final.ckpt"), "--manifest",
                        p(t + "/motion/test.manifest"), "--out", p(t + "/eval")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto report = slurp(p("a/eval/retrieval.txt"));
  EXPECT_FALSE(report.empty());
  EXPECT_EQ(report, slurp(p("b/eval/retrieval.txt")));
  EXPECT_EQ(slurp(p("a/eval/retrieval.records")), slurp(p("b/eval/retrieval.records")));
  EXPECT_NE(slurp(p("a/eval/retrieval.records")).find("metric=t2v.r1 value="), std::string::npos);

  const auto w = run({"wiseft", p("a/post"), "--indices", "0,2", "--out", p("replay/final.ckpt")});
  ASSERT_EQ(w.code, 0) << w.err;
  EXPECT_NE(w.out.find("averaged 0 2"), std::string::npos) << w.out;
  EXPECT_TRUE(fs::exists(p("replay/model.cfg")));
}

TEST_F(CliTest, EvalRejectsForeignModelConfig) {
  tiny_pipeline("a");
  // The stage-0 model.cfg describes a different tree than the post-pretrained checkpoint.
  const auto r = run({"eval", "--checkpoint", p("a/post/final.ckpt"), "--model-config", p("a/s0/model.cfg"),
                      "--manifest", p("a/motion/test.manifest")});
  EXPECT_EQ(r.code, dropclip::cli::kExitFailure);
}

}  // namespace
