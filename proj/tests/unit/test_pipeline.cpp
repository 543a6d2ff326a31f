// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <map>

#include "dropclip/model/model.hpp"
#include "dropclip/pipeline/run_config.hpp"
#include "dropclip/pipeline/tasks.hpp"
#include "dropclip/util/kv_file.hpp"

namespace md = dropclip::model;
namespace pl = dropclip::pipeline;
namespace sd = dropclip::synthdata;

namespace {

pl::RunConfig post_config() {
  auto c = pl::defaults_for(pl::Stage::post_pretrain);
  c.manifest = "data/train.manifest";
  c.init = "s0/final.ckpt";
  c.output_dir = "out";
  return c;
}

pl::EnvLookup env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const char* name) -> const char* {
    const auto it = vars.find(name);
    return it == vars.end() ? nullptr : it->second.c_str();
  };
}

md::ModelConfig tiny() {
  md::ModelConfig c;
  c.embed_dim = 8;
  c.decoder_dim = 8;
  c.proj_dim = 8;
  c.decoder_layers = 1;
  c.mlp_ratio = 2;
  c.frames = 2;
  c.height = c.width = 16;
  return c;
}

sd::DatasetManifest tiny_data(std::size_t count, std::uint64_t seed) {
  sd::DatasetManifest m;
  m.split = "test";
  m.seed = seed;
  m.count = count;
  m.frames = 2;
  m.height = m.width = 16;
  return m;
}

}  // namespace

TEST(RunConfig, StageDefaults) {
  const auto s0 = pl::defaults_for(pl::Stage::pretrain);
  EXPECT_EQ(s0.model.frames, 1u);
  EXPECT_EQ(s0.model.backbone, md::Backbone::frame_avg);
  EXPECT_FALSE(s0.model.with_decoder);
  EXPECT_EQ(s0.train.drop_ratio, 0.5);
  EXPECT_EQ(s0.train.mask_weight, 0.0);
  EXPECT_FALSE(s0.train.freeze_text);
  EXPECT_FALSE(s0.wise_ft.has_value());
  const auto post = pl::defaults_for(pl::Stage::post_pretrain);
  ASSERT_TRUE(post.wise_ft.has_value());
  EXPECT_EQ(post.wise_ft->k(), 10u);
  EXPECT_EQ(post.wise_ft->l(), 3u);
  EXPECT_EQ(post.train.drop_ratio, 0.9);
}

TEST(RunConfig, Stage0ModelKeepsWidths) {
  md::ModelConfig target;
  target.embed_dim = 48;
  const auto s0 = pl::stage0_model(target);
  EXPECT_EQ(s0.embed_dim, 48u);
  EXPECT_EQ(s0.frames, 1u);
  EXPECT_FALSE(s0.with_decoder);
}

TEST(RunConfig, RoundTripThroughText) {
  auto c = post_config();
  c.train.lr = 1.25e-4;
  c.threads = 3;
  c.wise_ft.reset();
  const auto text = pl::run_config_to_string(c);
  EXPECT_EQ(text.rfind("DROPCLIP-RUN v1\n", 0), 0u);
  const auto back = pl::parse_run_config(text, pl::defaults_for(pl::Stage::pretrain));
  EXPECT_EQ(pl::run_config_to_string(back), text);
  EXPECT_FALSE(back.wise_ft.has_value());
  EXPECT_EQ(back.stage, pl::Stage::post_pretrain);
}

TEST(RunConfig, PartialFilesOverlayTheBase) {
  const auto base = post_config();
  const auto c = pl::parse_run_config("DROPCLIP-RUN v1\ntrain.steps=123\nwiseft=2,4\n", base);
  EXPECT_EQ(c.train.steps, 123u);
  EXPECT_EQ(c.wise_ft->l(), 4u);
  EXPECT_EQ(c.train.lr, base.train.lr);
  EXPECT_EQ(c.init, base.init);
}

TEST(RunConfig, ParseErrors) {
  const auto base = post_config();
  EXPECT_THROW(pl::parse_run_config("DROPCLIP-RUN v1\ntrain.stepz=1\n", base), dropclip::util::FormatError);
  EXPECT_THROW(pl::parse_run_config("DROPCLIP-RUN v2\n", base), dropclip::util::VersionError);
  EXPECT_THROW(pl::parse_run_config("DROPCLIP-RUN v1\nthreads=0\n", base), dropclip::util::FormatError);
  EXPECT_THROW(pl::parse_schedule("10"), std::invalid_argument);
  EXPECT_THROW(pl::parse_schedule("a,b"), std::invalid_argument);
  EXPECT_EQ(pl::parse_schedule("4,2").k(), 4u);
  EXPECT_THROW(pl::parse_stage("finetune"), std::invalid_argument);
}

TEST(RunConfig, Validation) {
  auto c = post_config();
  EXPECT_NO_THROW(c.validate());
  c.init.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  auto s0 = pl::defaults_for(pl::Stage::pretrain);
  s0.manifest = "m";
  s0.output_dir = "o";
  EXPECT_NO_THROW(s0.validate());
  s0.wise_ft = pl::parse_schedule("2,2");
  EXPECT_THROW(s0.validate(), std::invalid_argument);
  s0.wise_ft.reset();
  s0.model.frames = 8;
  EXPECT_THROW(s0.validate(), std::invalid_argument);
}

TEST(RunConfig, EnvironmentOverridesSeedAndThreads) {
  auto c = post_config();
  pl::apply_environment(c, env({{"DROPCLIP_SEED", "42"}, {"DROPCLIP_THREADS", "4"}}));
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.threads, 4u);
  pl::apply_environment(c, env({}));
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_THROW(pl::apply_environment(c, env({{"DROPCLIP_THREADS", "0"}})), std::invalid_argument);
  EXPECT_ANY_THROW(pl::apply_environment(c, env({{"DROPCLIP_SEED", "x"}})));
}

TEST(RunConfig, PaperPresetKeepsSeed) {
  auto c = post_config();
  c.train.seed = 9;
  pl::apply_paper_preset(c);
  EXPECT_EQ(c.train.batch_size, 1024u);
  EXPECT_EQ(c.train.lr, 1e-5);
  EXPECT_EQ(c.train.steps, 50000u);
  EXPECT_EQ(c.train.warmup, 4000u);
  EXPECT_EQ(c.train.seed, 9u);
}

TEST(Tasks, NamesRoundTrip) {
  for (auto t : {pl::EvalTask::retrieval, pl::EvalTask::multiple_choice, pl::EvalTask::classify, pl::EvalTask::vqa,
                 pl::EvalTask::masked_tokens}) {
    EXPECT_EQ(pl::parse_eval_task(pl::name(t)), t);
  }
  EXPECT_THROW(pl::parse_eval_task("zero-shot"), std::invalid_argument);
  for (const auto& t : pl::direction_templates()) EXPECT_NE(t.find("{}"), std::string::npos);
}

TEST(Tasks, RetrievalReportIsByteStable) {
  const auto c = tiny();
  const auto p = md::init_params<float>(c, 1);
  pl::EvalRequest r;
  r.split = tiny_data(20, 3);
  const auto a = pl::run_eval(p, c, r);
  const auto b = pl::run_eval(p, c, r);
  EXPECT_EQ(a.text(), b.text());
  EXPECT_EQ(a.records(), b.records());
  EXPECT_GE(a.metric("t2v.mdr"), 1.0);
  EXPECT_LE(a.metric("v2t.r1"), a.metric("v2t.r5"));
  EXPECT_THROW(a.metric("t2v.r50"), std::out_of_range);
}

TEST(Tasks, MultipleChoiceHonoursLimit) {
  const auto c = tiny();
  const auto p = md::init_params<float>(c, 1);
  pl::EvalRequest r;
  r.task = pl::EvalTask::multiple_choice;
  r.split = tiny_data(120, 4);
  r.limit = 10;
  const auto rep = pl::run_eval(p, c, r);
  EXPECT_EQ(rep.metric("clips"), 10.0);
  const double acc = rep.metric("accuracy");
  EXPECT_EQ(acc, std::round(acc / 10.0) * 10.0);
}

TEST(Tasks, RejectsMismatchedGeometryAndMissingReference) {
  const auto c = tiny();
  const auto p = md::init_params<float>(c, 1);
  pl::EvalRequest r;
  r.split = tiny_data(8, 1);
  r.split.frames = 3;
  EXPECT_THROW(pl::run_eval(p, c, r), std::invalid_argument);
  r.split = tiny_data(8, 1);
  r.task = pl::EvalTask::vqa;
  EXPECT_THROW(pl::run_eval(p, c, r), std::invalid_argument);
}

TEST(Tasks, MaskedTokensReportsMargin) {
  const auto c = tiny();
  const auto p = md::init_params<float>(c, 1);
  pl::EvalRequest r;
  r.task = pl::EvalTask::masked_tokens;
  r.split = tiny_data(10, 1);
  r.reference = tiny_data(20, 2);
  const auto rep = pl::run_eval(p, c, r);
  EXPECT_NEAR(rep.metric("margin"), rep.metric("accuracy") - rep.metric("prior"), 1e-9);
}

TEST(Tasks, LimitKeepsLeadingSamples) {
  const auto c = tiny();
  const auto p = md::init_params<float>(c, 1);
  pl::EvalRequest full;
  full.split = tiny_data(12, 3);
  pl::EvalRequest cut = full;
  cut.split.count = 40;
  cut.limit = 12;
  EXPECT_EQ(pl::run_eval(p, c, full).records(), pl::run_eval(p, c, cut).records());
}
