// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "dropclip/eval/bench.hpp"
#include "dropclip/eval/fusion.hpp"
#include "dropclip/eval/report.hpp"
#include "dropclip/eval/retrieval.hpp"
#include "dropclip/eval/zero_shot.hpp"
#include "dropclip/model/model.hpp"
#include "dropclip/util/parallel.hpp"

namespace ev = dropclip::eval;
namespace md = dropclip::model;
namespace nx = dropclip::numerics;
namespace sd = dropclip::synthdata;
using dropclip::util::Rng;

namespace {

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

sd::DatasetManifest tiny_data(const std::string& split, std::size_t count, std::uint64_t seed) {
  sd::DatasetManifest m;
  m.split = split;
  m.seed = seed;
  m.count = count;
  m.frames = 2;
  m.height = m.width = 16;
  return m;
}

std::vector<sd::VideoClip> clips_of(const sd::DatasetManifest& m) {
  std::vector<sd::VideoClip> out;
  for (std::size_t i = 0; i < m.count; ++i) out.push_back(sd::gen_sample(m, i).clip);
  return out;
}

ev::SimilarityMatrix matrix(std::size_t n, std::vector<double> scores) {
  ev::SimilarityMatrix s;
  s.rows = s.cols = n;
  s.scores = std::move(scores);
  for (std::size_t i = 0; i < n; ++i) s.truth.push_back(i);
  return s;
}

}  // namespace

TEST(Retrieval, HandRanksAndPessimisticTies) {
  // Row 0: correct is best. Row 1: one candidate beats it. Row 2: tied with one.
  const auto s = matrix(3, {0.9, 0.1, 0.2,
                            0.8, 0.5, 0.1,
                            0.3, 0.3, 0.3});
  EXPECT_EQ(ev::retrieval_ranks(s), (std::vector<std::size_t>{1, 2, 3}));
  const auto r = ev::retrieval_eval(s);
  EXPECT_NEAR(r.r1, 100.0 / 3.0, 1e-12);
  EXPECT_EQ(r.r5, 100.0);
  EXPECT_EQ(r.median_rank, 2.0);
}

TEST(Retrieval, EvenCountMedianAveragesMiddlePair) {
  const auto s = matrix(2, {1, 0, 1, 0});
  EXPECT_EQ(ev::retrieval_ranks(s), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(ev::retrieval_eval(s).median_rank, 1.5);
}

TEST(Retrieval, RandomMatricesAgreeWithSortOracle) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> sc(30 * 30);
    for (auto& x : sc) x = std::round(rng.normal() * 2) / 2;
    const auto s = matrix(30, sc);
    const auto ranks = ev::retrieval_ranks(s);
    for (std::size_t r = 0; r < 30; ++r) {
      std::vector<std::size_t> order(30);
      for (std::size_t c = 0; c < 30; ++c) order[c] = c;
      // Stable sort by descending score, with the ground truth last among equals.
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (s.at(r, a) != s.at(r, b)) return s.at(r, a) > s.at(r, b);
        return a != r && b == r;
      });
      const auto pos = std::find(order.begin(), order.end(), r) - order.begin();
      ASSERT_EQ(ranks[r], static_cast<std::size_t>(pos) + 1);
    }
  }
}

TEST(Retrieval, ValidationErrors) {
  auto s = matrix(2, {1, 0, 0, 1});
  s.truth[1] = 5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = matrix(2, {1, NAN, 0, 1});
  EXPECT_THROW(ev::retrieval_eval(s), std::invalid_argument);
}

TEST(Retrieval, SimilarityIsRowDotProducts) {
  const nx::Tensor<float> q({2, 2}, {1, 0, 0, 1});
  const nx::Tensor<float> c({3, 2}, {0.5f, 0.5f, 1, 0, 0, -1});
  const auto s = ev::similarity(q, c);
  EXPECT_EQ(s.rows, 2u);
  EXPECT_EQ(s.cols, 3u);
  EXPECT_EQ(s.at(0, 1), 1.0);
  EXPECT_EQ(s.at(1, 2), -1.0);
  EXPECT_EQ(s.truth, (std::vector<std::size_t>{0, 1}));
}

TEST(Report, TableAndRecords) {
  ev::Table t({"name", "value"});
  t.add_row({"r1", ev::fixed(12.5, 2)});
  t.add_row({"median", "3"});
  EXPECT_EQ(t.text(), "name    value\n------  -----\nr1      12.50\nmedian  3\n");
  EXPECT_EQ(t.records(), "name=r1 value=12.50\nname=median value=3\n");
  EXPECT_THROW(t.add_row({"x"}), std::invalid_argument);
  EXPECT_EQ(ev::fixed(1.0 / 3.0), "0.3333");
}

TEST(ZeroShot, ChooseAndTemplates) {
  const double tie[] = {0.5, 0.7, 0.7};
  EXPECT_EQ(ev::choose(tie), 1u);
  const double one[] = {1.0};
  EXPECT_THROW(ev::choose(one), std::invalid_argument);
  EXPECT_EQ(ev::fill_template("a shape moving {}", "left"), "a shape moving left");
  EXPECT_THROW(ev::fill_template("moving", "left"), std::invalid_argument);
}

TEST(ZeroShot, ClassifyAveragesOverTemplates) {
  // Two classes x two templates. Class 0 has one perfect and one poor prompt
  // (mean 0.45); class 1 has two decent ones (mean 0.6).
  const nx::Tensor<float> e({4, 2}, {1.0f, 0.0f, -0.1f, 0.0f, 0.6f, 0.0f, 0.6f, 0.0f});
  const float video[] = {1.0f, 0.0f};
  EXPECT_EQ(ev::classify_embedded(video, e, 2), 1u);
}

TEST(ZeroShot, EmbeddingsAreUnitNormAndThreadCountInvariant) {
  const auto c = tiny();
  const auto p = md::init_params<float>(c, 3);
  const auto clips = clips_of(tiny_data("test", 40, 1));
  dropclip::util::set_worker_threads(1);
  const auto a = ev::embed_videos(p, c, clips);
  dropclip::util::set_worker_threads(3);
  const auto b = ev::embed_videos(p, c, clips);
  dropclip::util::set_worker_threads(1);
  ASSERT_EQ(a.shape(), (nx::Shape{40, c.proj_dim}));
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]);
  for (std::size_t r = 0; r < 40; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < c.proj_dim; ++j) s += a.data()[r * c.proj_dim + j] * a.data()[r * c.proj_dim + j];
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
}

TEST(ZeroShot, MultipleChoiceAgreesWithEmbeddings) {
  const auto c = tiny();
  const auto p = md::init_params<float>(c, 4);
  const auto clip = sd::gen_sample(tiny_data("test", 4, 2), 0).clip;
  const sd::Tokenizer tok(sd::Vocabulary::standard(), c.max_text_len);
  const std::vector<sd::TokenizedText> cands{tok.tokenize("moving left"), tok.tokenize("moving right")};
  const auto v = ev::embed_videos(p, c, std::span(&clip, 1));
  const auto t = ev::embed_texts(p, c, cands);
  double s[2] = {};
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < c.proj_dim; ++j) s[k] += v.data()[j] * t.data()[k * c.proj_dim + j];
  EXPECT_EQ(ev::multiple_choice(p, c, clip, cands), ev::choose(s));
}

TEST(Vqa, AnswersQuestionsAndDims) {
  EXPECT_EQ(ev::answer_vocabulary().size(), 12u);
  EXPECT_EQ(ev::answer_vocabulary()[ev::answer_id("up")], "up");
  EXPECT_THROW(ev::answer_id("purple"), std::invalid_argument);
  const auto qa = ev::make_qa(tiny_data("test", 5, 3));
  ASSERT_EQ(qa.size(), 15u);
  EXPECT_EQ(qa[4].sample, 1u);
  EXPECT_EQ(qa[4].type, ev::QuestionType::shape);
  const auto c = tiny();
  EXPECT_EQ(ev::vqa_feature_dim(c, ev::VqaFeatureMode::alignment), 16u);
  EXPECT_EQ(ev::vqa_feature_dim(c, ev::VqaFeatureMode::fusion), 8u);
  EXPECT_EQ(ev::vqa_feature_dim(c, ev::VqaFeatureMode::combined), 24u);
  EXPECT_EQ(ev::parse_vqa_mode("combined"), ev::VqaFeatureMode::combined);
  EXPECT_THROW(ev::parse_vqa_mode("both"), std::invalid_argument);
}

TEST(Vqa, FusionWithoutDecoderIsRejected) {
  auto c = tiny();
  c.with_decoder = false;
  const auto p = md::init_params<float>(c, 1);
  const auto clips = clips_of(tiny_data("test", 1, 1));
  const sd::Tokenizer tok(sd::Vocabulary::standard(), c.max_text_len);
  const auto q = tok.tokenize(std::string(ev::question_text(ev::QuestionType::color)));
  EXPECT_THROW(ev::vqa_features(p, c, ev::VqaFeatureMode::fusion, clips, std::span(&q, 1)), std::invalid_argument);
  EXPECT_EQ(ev::vqa_features(p, c, ev::VqaFeatureMode::alignment, clips, std::span(&q, 1)).dim(1), 16u);
}

TEST(Vqa, HeadLearnsColourFromRawFeaturesAndIsDeterministic) {
  const auto c = tiny();
  const auto p = md::init_params<float>(c, 5);
  const auto train = tiny_data("train", 120, 4), test = tiny_data("test", 40, 5);
  ev::VqaHeadConfig head;
  head.epochs = 30;
  const auto a = ev::vqa_train_eval(p, c, train, test, ev::VqaFeatureMode::combined, head);
  const auto b = ev::vqa_train_eval(p, c, train, test, ev::VqaFeatureMode::combined, head);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.counts, (std::array<std::size_t, 3>{40, 40, 40}));
  EXPECT_NEAR(a.accuracy, (a.per_type[0] + a.per_type[1] + a.per_type[2]) / 3.0, 1e-9);
  // Colour is a linear function of pixel means; even an untrained encoder exposes it.
  EXPECT_GT(a.per_type[0], 40.0);
}

TEST(Mlm, PriorBaselineCountsMostFrequentWord) {
  const auto c = tiny();
  const auto p = md::init_params<float>(c, 6);
  const auto r = ev::masked_token_accuracy(p, c, tiny_data("test", 30, 6), tiny_data("train", 60, 7), 0.15, 0);
  EXPECT_GT(r.targets, 0u);
  EXPECT_GE(r.accuracy, 0.0);
  EXPECT_LE(r.accuracy, 100.0);
  EXPECT_GT(r.prior_accuracy, 0.0);
  // Every caption contains "a" and, for moving objects, "moving".
  const auto& vocab = sd::Vocabulary::standard();
  EXPECT_TRUE(r.prior_word == vocab.id("a") || r.prior_word == vocab.id("moving"));
  const auto again = ev::masked_token_accuracy(p, c, tiny_data("test", 30, 6), tiny_data("train", 60, 7), 0.15, 0);
  EXPECT_EQ(r.accuracy, again.accuracy);
}

TEST(Bench, DroppingReducesTokensAndMemory) {
  const auto c = tiny();
  dropclip::train::TrainConfig t;
  t.batch_size = 4;
  t.steps = 10;
  t.warmup = 1;
  const double ratios[] = {0.0, 0.5, 0.75};
  ev::BenchOptions o;
  o.timed_steps = 1;
  const auto rows = ev::bench_drop(c, t, tiny_data("train", 8, 1), ratios, o);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].kept_tokens, 8u);
  EXPECT_EQ(rows[1].kept_tokens, 4u);
  EXPECT_EQ(rows[2].kept_tokens, 2u);
  EXPECT_GT(rows[0].peak_live_scalars, rows[1].peak_live_scalars);
  EXPECT_GT(rows[1].peak_live_scalars, rows[2].peak_live_scalars);
}
