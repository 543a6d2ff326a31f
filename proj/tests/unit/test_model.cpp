// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "dropclip/masking/masking.hpp"
#include "dropclip/model/checkpoint.hpp"
#include "dropclip/model/model.hpp"
#include "dropclip/model/patchify.hpp"
#include "dropclip/util/kv_file.hpp"

namespace md = dropclip::model;
namespace mk = dropclip::masking;
namespace nx = dropclip::numerics;
namespace sd = dropclip::synthdata;
using dropclip::util::Rng;

namespace {

md::ModelConfig small() {
  md::ModelConfig c;
  c.embed_dim = 16;
  c.decoder_dim = 16;
  c.proj_dim = 8;
  c.frames = 4;
  c.height = c.width = 16;
  c.decoder_layers = 1;
  return c;
}

sd::VideoClip noise(const md::ModelConfig& c, Rng& rng) {
  sd::VideoClip clip{c.frames, c.height, c.width, {}};
  clip.pixels.resize(c.frames * c.height * c.width * 3);
  for (auto& p : clip.pixels) p = static_cast<float>(rng.uniform());
  return clip;
}

mk::KeptPatches<float> keep(const sd::VideoClip& clip, const md::ModelConfig& c, std::vector<std::size_t> idx) {
  const auto p = md::patchify<float>(clip, c.patch_size);
  return {nx::gather(p.tokens, std::span<const std::size_t>(idx)), idx};
}

std::vector<std::size_t> all_indices(const md::ModelConfig& c) {
  std::vector<std::size_t> v(c.num_patches());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

TEST(Patchify, Geometry224x16x8Yields1568Tokens) {
  sd::VideoClip clip{8, 224, 224, std::vector<float>(8 * 224 * 224 * 3, 0.5f)};
  const auto p = md::patchify<float>(clip, 16);
  EXPECT_EQ(p.tokens.shape(), (nx::Shape{1568, 768}));
  EXPECT_EQ(p.positions.size(), 1568u);
  EXPECT_EQ(p.positions[1567].frame, 7u);
}

TEST(Patchify, LayoutIsRowMajorWithChannelsInnermost) {
  Rng rng(1);
  md::ModelConfig c = small();
  const auto clip = noise(c, rng);
  const auto p = md::patchify<float>(clip, 8);
  // Patch 5 = frame 1, row 0, col 1 for a 2x2 grid per frame.
  const std::size_t patch = 5, frame = 1, row = 0, col = 1;
  ASSERT_EQ(p.positions[patch].frame, frame);
  ASSERT_EQ(p.positions[patch].row, row);
  ASSERT_EQ(p.positions[patch].col, col);
  for (std::size_t dy = 0; dy < 8; ++dy)
    for (std::size_t dx = 0; dx < 8; ++dx)
      for (std::size_t ch = 0; ch < 3; ++ch)
        ASSERT_EQ(p.tokens.data()[patch * 192 + (dy * 8 + dx) * 3 + ch],
                  clip.at(frame, row * 8 + dy, col * 8 + dx, ch));
}

TEST(Patchify, IndivisibleSizeRejected) {
  sd::VideoClip clip{1, 20, 16, std::vector<float>(20 * 16 * 3)};
  EXPECT_THROW(md::patchify<float>(clip, 8), std::invalid_argument);
}

TEST(Init, DeterministicPerSeedAndName) {
  const auto a = md::init_params<float>(small(), 3);
  const auto b = md::init_params<float>(small(), 3);
  const auto c = md::init_params<float>(small(), 4);
  EXPECT_TRUE(a.identical(b));
  EXPECT_FALSE(a.identical(c));
  EXPECT_NEAR(a["logit_scale"].item(), std::log(1.0 / 0.07), 1e-6);
}

TEST(Init, ZeroInitialisedResidualOutputs) {
  const auto p = md::init_params<float>(small(), 1);
  for (const char* n : {"vision.temporal.out.w", "vision.temporal.out.b", "decoder.layer0.cross_attn.w_o",
                        "decoder.layer0.cross_attn.b_o"}) {
    for (float v : p[n].data()) ASSERT_EQ(v, 0.0f) << n;
  }
}

TEST(Init, FrameAvgAndNoDecoderOmitBlocks) {
  auto c = small();
  c.backbone = md::Backbone::frame_avg;
  c.with_decoder = false;
  const auto p = md::init_params<float>(c, 1);
  for (const auto& [name, _] : p.entries()) {
    EXPECT_NE(name.rfind("vision.temporal", 0), 0u) << name;
    EXPECT_NE(name.rfind("decoder", 0), 0u) << name;
  }
}

TEST(Encoder, TemporalAtInitEqualsFrameAverage) {
  auto temporal = small();
  auto flat = temporal;
  flat.backbone = md::Backbone::frame_avg;
  const auto p = md::init_params<float>(temporal, 2);
  Rng rng(3);
  std::vector<mk::KeptPatches<float>> v;
  for (int i = 0; i < 5; ++i) v.push_back(keep(noise(temporal, rng), temporal, all_indices(temporal)));
  nx::NoGradScope<float> off;
  const auto a = md::encode_video(p, temporal, std::span<const mk::KeptPatches<float>>(v));
  const auto b = md::encode_video(p, flat, std::span<const mk::KeptPatches<float>>(v));
  for (std::size_t i = 0; i < a.pooled.size(); ++i) EXPECT_NEAR(a.pooled.data()[i], b.pooled.data()[i], 1e-6);
}

TEST(Encoder, StorageOrderOfKeptPatchesIsIrrelevant) {
  const auto c = small();
  const auto p = md::init_params<float>(c, 5);
  Rng rng(6);
  const auto clip = noise(c, rng);
  const auto a = keep(clip, c, {1, 4, 6, 13});
  const auto b = keep(clip, c, {13, 1, 6, 4});
  nx::NoGradScope<float> off;
  const auto fa = md::encode_video(p, c, std::span<const mk::KeptPatches<float>>(&a, 1));
  const auto fb = md::encode_video(p, c, std::span<const mk::KeptPatches<float>>(&b, 1));
  for (std::size_t i = 0; i < fa.pooled.size(); ++i) EXPECT_EQ(fa.pooled.data()[i], fb.pooled.data()[i]);
  EXPECT_EQ(fb.indices[0], (std::vector<std::size_t>{1, 4, 6, 13}));
  EXPECT_EQ(fa.tokens.dim(0), 5u);
}

TEST(Encoder, BatchingDoesNotChangePerSampleResult) {
  const auto c = small();
  const auto p = md::init_params<float>(c, 5);
  Rng rng(7);
  const auto x = keep(noise(c, rng), c, {0, 2, 9});
  const auto y = keep(noise(c, rng), c, {3, 15});
  nx::NoGradScope<float> off;
  const std::vector<mk::KeptPatches<float>> both{x, y};
  const auto fb = md::encode_video(p, c, std::span<const mk::KeptPatches<float>>(both));
  const auto fx = md::encode_video(p, c, std::span<const mk::KeptPatches<float>>(&x, 1));
  for (std::size_t i = 0; i < c.proj_dim; ++i) EXPECT_NEAR(fb.pooled.data()[i], fx.pooled.data()[i], 1e-6);
}

TEST(Encoder, RejectsDuplicateAndOutOfRangeIndices) {
  const auto c = small();
  const auto p = md::init_params<float>(c, 5);
  Rng rng(8);
  const auto clip = noise(c, rng);
  auto dup = keep(clip, c, {2, 2});
  EXPECT_THROW(md::encode_video(p, c, std::span<const mk::KeptPatches<float>>(&dup, 1)), std::invalid_argument);
  auto far = keep(clip, c, {1});
  far.indices[0] = 99;
  EXPECT_THROW(md::encode_video(p, c, std::span<const mk::KeptPatches<float>>(&far, 1)), std::out_of_range);
}

TEST(TextEncoder, PaddingContentIsIgnored) {
  const auto c = small();
  const auto p = md::init_params<float>(c, 9);
  const sd::Tokenizer tok(sd::Vocabulary::standard(), c.max_text_len);
  auto a = tok.tokenize("a red circle moving up");
  auto b = a;
  // Positions after EOS are masked as keys and pooling reads the EOS row.
  b.ids.back() = sd::kPad;
  nx::NoGradScope<float> off;
  const std::vector<sd::TokenizedText> texts{a, b};
  const auto f = md::encode_text(p, c, std::span<const sd::TokenizedText>(texts));
  for (std::size_t i = 0; i < c.proj_dim; ++i) EXPECT_EQ(f.pooled.data()[i], f.pooled.data()[c.proj_dim + i]);
}

TEST(Decoder, LogitsCoverVocabularyPerPosition) {
  const auto c = small();
  const auto p = md::init_params<float>(c, 10);
  Rng rng(11);
  const auto v = keep(noise(c, rng), c, {0, 5});
  const sd::Tokenizer tok(sd::Vocabulary::standard(), c.max_text_len);
  const auto t = tok.tokenize("a blue square");
  nx::NoGradScope<float> off;
  const auto vf = md::encode_video(p, c, std::span<const mk::KeptPatches<float>>(&v, 1));
  const auto tf = md::encode_text(p, c, std::span<const sd::TokenizedText>(&t, 1));
  const auto logits = md::cross_decode(p, c, tf, vf);
  EXPECT_EQ(logits.shape(), (nx::Shape{c.max_text_len, c.vocab_size}));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto p = md::init_params<float>(small(), 12);
  const auto bytes = md::encode_checkpoint(p);
  EXPECT_EQ(bytes.substr(0, 17), "DROPCLIP-CKPT v1\n");
  EXPECT_TRUE(md::decode_checkpoint(bytes).identical(p));
  EXPECT_EQ(md::encode_checkpoint(md::decode_checkpoint(bytes)), bytes);
}

TEST(Checkpoint, HandEncodedSingleEntry) {
  md::ParamTree<float> t;
  t.add("w", nx::Tensor<float>({2}, {1.0f, -2.0f}), false);
  const auto bytes = md::encode_checkpoint(t);
  std::string want = "DROPCLIP-CKPT v1\n";
  auto put = [&](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) want.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put(1, 8);       // entry count
  put(1, 4);       // name length
  want += "w";
  put(0, 1);       // frozen
  put(1, 4);       // rank
  put(2, 8);       // dim
  put(0x3f800000, 4);
  put(0xc0000000, 4);
  EXPECT_EQ(bytes, want);
}

TEST(Checkpoint, TruncationAndVersionErrors) {
  const auto bytes = md::encode_checkpoint(md::init_params<float>(small(), 12));
  EXPECT_THROW(md::decode_checkpoint(bytes.substr(0, bytes.size() - 3)), dropclip::util::FormatError);
  EXPECT_THROW(md::decode_checkpoint(bytes + "x"), dropclip::util::FormatError);
  auto v2 = bytes;
  v2[15] = '2';
  EXPECT_THROW(md::decode_checkpoint(v2), dropclip::util::VersionError);
}

TEST(Checkpoint, LoadValidatesAgainstConfig) {
  const auto path = std::filesystem::temp_directory_path() / "dropclip_model_test.ckpt";
  md::save_checkpoint(md::init_params<float>(small(), 1), path);
  EXPECT_NO_THROW(md::load_checkpoint(path, small()));
  auto other = small();
  other.embed_dim = 8;
  other.decoder_dim = 8;
  EXPECT_THROW(md::load_checkpoint(path, other), md::StructureError);
  std::filesystem::remove(path);
}

TEST(Adapt, CopiesSharedEntriesAndInitialisesTheRest) {
  auto stage0 = small();
  stage0.frames = 1;
  stage0.backbone = md::Backbone::frame_avg;
  stage0.with_decoder = false;
  const auto base = md::init_params<float>(stage0, 1);
  const auto adapted = md::adapt_params(base, small(), 2);
  EXPECT_EQ(adapted["vision.patch_embed.w"].data()[3], base["vision.patch_embed.w"].data()[3]);
  EXPECT_TRUE(adapted.contains("vision.temporal.query"));
  for (float v : adapted["vision.temporal.out.w"].data()) ASSERT_EQ(v, 0.0f);
  auto wide = small();
  wide.embed_dim = 24;
  wide.decoder_dim = 24;
  EXPECT_THROW(md::adapt_params(base, wide, 2), md::StructureError);
}

TEST(ModelConfig, RoundTripsAndValidates) {
  auto c = small();
  c.backbone = md::Backbone::frame_avg;
  dropclip::util::KvDocument doc{"X"};
  md::store(c, doc, "m.");
  EXPECT_EQ(md::load_model_config(doc, "m."), c);
  c.vision_heads = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
