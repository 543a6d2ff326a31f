// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dropclip/util/rng.hpp"

namespace dropclip::model {

namespace nx = numerics;

namespace {

enum class Init { normal, zeros, ones };

template <typename T>
class Builder {
 public:
  Builder(ParamTree<T>& tree, std::uint64_t seed, double std) : tree_(tree), seed_(seed), std_(std) {}

  void add(const std::string& name, nx::Shape shape, Init init = Init::normal) {
    std::vector<T> data(nx::shape_size(shape), T(0));
    if (init == Init::ones) {
      std::fill(data.begin(), data.end(), T(1));
    } else if (init == Init::normal) {
      util::Rng rng(util::mix_seed(util::mix_seed(seed_, util::fnv1a("init")), util::fnv1a(name)));
      for (auto& v : data) v = static_cast<T>(std_ * rng.normal());
    }
    tree_.add(name, nx::Tensor<T>(std::move(shape), std::move(data)));
  }

  void linear(const std::string& pre, std::size_t in, std::size_t out, bool zero = false) {
    add(pre + ".w", {in, out}, zero ? Init::zeros : Init::normal);
    add(pre + ".b", {out}, Init::zeros);
  }

  void norm(const std::string& pre, std::size_t d) {
    add(pre + ".g", {d}, Init::ones);
    add(pre + ".b", {d}, Init::zeros);
  }

  void attn(const std::string& pre, std::size_t dq, std::size_t dkv, bool zero_out = false) {
    add(pre + ".w_q", {dq, dq});
    add(pre + ".b_q", {dq}, Init::zeros);
    add(pre + ".w_k", {dkv, dq});
    add(pre + ".b_k", {dq}, Init::zeros);
    add(pre + ".w_v", {dkv, dq});
    add(pre + ".b_v", {dq}, Init::zeros);
    add(pre + ".w_o", {dq, dq}, zero_out ? Init::zeros : Init::normal);
    add(pre + ".b_o", {dq}, Init::zeros);
  }

  void mlp(const std::string& pre, std::size_t d, std::size_t ratio) {
    add(pre + ".w1", {d, d * ratio});
    add(pre + ".b1", {d * ratio}, Init::zeros);
    add(pre + ".w2", {d * ratio, d});
    add(pre + ".b2", {d}, Init::zeros);
  }

  void block(const std::string& pre, std::size_t d, std::size_t ratio) {
    norm(pre + ".ln1", d);
    attn(pre + ".attn", d, d);
    norm(pre + ".ln2", d);
    mlp(pre + ".mlp", d, ratio);
  }

 private:
  ParamTree<T>& tree_;
  std::uint64_t seed_;
  double std_;
};

std::string indexed(const std::string& pre, std::size_t i) { return pre + std::to_string(i); }

template <typename T>
nx::Tensor<T> mha(const ParamTree<T>& p, const std::string& pre, const nx::Tensor<T>& xq,
                  const nx::Tensor<T>& xkv, std::size_t heads, const nx::AttentionLayout& layout) {
  auto q = nx::linear(xq, p[pre + ".w_q"], p[pre + ".b_q"]);
  auto k = nx::linear(xkv, p[pre + ".w_k"], p[pre + ".b_k"]);
  auto v = nx::linear(xkv, p[pre + ".w_v"], p[pre + ".b_v"]);
  return nx::linear(nx::attention(q, k, v, heads, layout), p[pre + ".w_o"], p[pre + ".b_o"]);
}

template <typename T>
nx::Tensor<T> norm(const ParamTree<T>& p, const std::string& pre, const nx::Tensor<T>& x) {
  return nx::layer_norm(x, p[pre + ".g"], p[pre + ".b"]);
}

template <typename T>
nx::Tensor<T> mlp(const ParamTree<T>& p, const std::string& pre, const nx::Tensor<T>& x) {
  auto h = nx::gelu(nx::linear(x, p[pre + ".w1"], p[pre + ".b1"]));
  return nx::linear(h, p[pre + ".w2"], p[pre + ".b2"]);
}

// Pre-norm transformer block.
template <typename T>
nx::Tensor<T> block(const ParamTree<T>& p, const std::string& pre, nx::Tensor<T> x,
                    std::size_t heads, const nx::AttentionLayout& layout) {
  auto h = norm(p, pre + ".ln1", x);
  x = nx::add(x, mha(p, pre + ".attn", h, h, heads, layout));
  return nx::add(x, mlp(p, pre + ".mlp", norm(p, pre + ".ln2", x)));
}

}  // namespace

template <typename T>
ParamTree<T> init_params(const ModelConfig& config, std::uint64_t seed, double init_std) {
  config.validate();
  ParamTree<T> tree;
  Builder<T> b(tree, seed, init_std);
  const auto d = config.embed_dim;
  const auto r = config.mlp_ratio;

  b.linear("vision.patch_embed", config.patch_dim(), d);
  b.add("vision.cls", {1, d});
  b.add("vision.pos_spatial", {config.patches_per_frame(), d});
  b.norm("vision.ln_pre", d);
  for (std::size_t i = 0; i < config.vision_layers; ++i) b.block(indexed("vision.block", i), d, r);
  b.norm("vision.ln_post", d);
  b.add("vision.proj", {d, config.proj_dim});
  if (config.has_temporal_block()) {
    b.add("vision.temporal.query", {1, d});
    b.add("vision.temporal.pos", {config.frames, d});
    b.linear("vision.temporal.frames", config.frames * d, d, /*zero=*/true);
    b.norm("vision.temporal.ln_q", d);
    b.norm("vision.temporal.ln_kv", d);
    b.attn("vision.temporal.attn", d, d);
    b.norm("vision.temporal.ln2", d);
    b.mlp("vision.temporal.mlp", d, r);
    b.linear("vision.temporal.out", d, d, /*zero=*/true);
  }

  b.add("text.token_embed", {config.vocab_size, d});
  b.add("text.pos", {config.max_text_len, d});
  for (std::size_t i = 0; i < config.text_layers; ++i) b.block(indexed("text.block", i), d, r);
  b.norm("text.ln_final", d);
  b.add("text.proj", {d, config.proj_dim});

  if (config.with_decoder) {
    const auto dd = config.decoder_dim;
    b.linear("decoder.in_proj", d, dd);
    b.linear("decoder.video_proj", d, dd);
    for (std::size_t i = 0; i < config.decoder_layers; ++i) {
      const auto pre = indexed("decoder.layer", i);
      b.norm(pre + ".ln1", dd);
      b.attn(pre + ".self_attn", dd, dd);
      b.norm(pre + ".ln2", dd);
      b.attn(pre + ".cross_attn", dd, dd, /*zero_out=*/true);
      b.norm(pre + ".ln3", dd);
      b.mlp(pre + ".mlp", dd, r);
    }
    b.norm("decoder.ln_final", dd);
    b.add("decoder.head.w1", {dd, dd});
    b.add("decoder.head.b1", {dd}, Init::zeros);
    b.add("decoder.head.w2", {dd, config.vocab_size});
    b.add("decoder.head.b2", {config.vocab_size}, Init::zeros);
  }

  tree.add("logit_scale", nx::Tensor<T>({1}, {static_cast<T>(std::log(1.0 / 0.07))}));
  return tree;
}

ParamTree<float> adapt_params(const ParamTree<float>& base, const ModelConfig& target,
                              std::uint64_t seed) {
  auto out = init_params<float>(target, seed);
  for (auto& [name, e] : out.entries()) {
    if (!base.contains(name)) continue;
    const auto& src = base[name];
    if (src.shape() != e.value.shape()) {
      throw StructureError("adapt: entry '" + name + "' has shape " + nx::shape_str(src.shape()) +
                           ", target expects " + nx::shape_str(e.value.shape()));
    }
    e.value = src.clone();
  }
  return out;
}

template <typename T>
VisionFeatures<T> encode_video(const ParamTree<T>& params, const ModelConfig& config,
                               std::span<const masking::KeptPatches<T>> videos) {
  if (videos.empty()) throw nx::ShapeError("encode_video: empty batch");
  const std::size_t ppf = config.patches_per_frame();
  const std::size_t n_total = config.num_patches();
  const std::size_t batch = videos.size();

  VisionFeatures<T> out;
  out.indices.resize(batch);

  // Rows of all samples, reordered so each sample's patches ascend by index.
  std::vector<nx::Tensor<T>> parts;
  std::vector<std::size_t> order;  // into the concatenation of the inputs
  std::vector<std::size_t> slots;
  std::size_t base = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& v = videos[b];
    if (v.tokens.rank() != 2 || v.tokens.dim(1) != config.patch_dim() ||
        v.tokens.dim(0) != v.indices.size() || v.indices.empty()) {
      throw nx::ShapeError("encode_video: sample " + std::to_string(b) + " has tokens " +
                           nx::shape_str(v.tokens.shape()) + " with " +
                           std::to_string(v.indices.size()) + " indices; expected (k>0, " +
                           std::to_string(config.patch_dim()) + ")");
    }
    std::vector<std::size_t> perm(v.indices.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t x, std::size_t y) { return v.indices[x] < v.indices[y]; });
    for (std::size_t i = 0; i < perm.size(); ++i) {
      const auto idx = v.indices[perm[i]];
      if (idx >= n_total) {
        throw std::out_of_range("encode_video: patch index " + std::to_string(idx) +
                                " out of range for " + std::to_string(n_total) + " patches");
      }
      if (i > 0 && idx == out.indices[b].back()) {
        throw std::invalid_argument("encode_video: duplicate patch index " + std::to_string(idx));
      }
      order.push_back(base + perm[i]);
      slots.push_back(idx % ppf);
      out.indices[b].push_back(idx);
    }
    parts.push_back(v.tokens);
    base += v.tokens.dim(0);
  }
  const std::size_t kept_total = base;

  auto raw = parts.size() == 1 ? parts[0] : nx::concat(parts, 0);
  auto x = nx::gather(raw, std::span<const std::size_t>(order));
  x = nx::linear(x, params["vision.patch_embed.w"], params["vision.patch_embed.b"]);
  x = nx::add(x, nx::gather(params["vision.pos_spatial"], std::span<const std::size_t>(slots)));

  // Frame groups: a class row followed by that frame's kept patches.
  std::vector<std::size_t> seq;           // rows of concat([x, cls])
  std::vector<std::int32_t> segment;      // frame group per sequence row
  std::vector<std::size_t> cls_pos;       // sequence row of each group's class token
  std::vector<std::size_t> group_sample;
  std::vector<std::size_t> group_frame;
  std::vector<std::size_t> token_pos;     // sequence row of each patch token (in x order)
  std::vector<std::size_t> token_frame;
  std::vector<std::int32_t> token_sample;
  std::size_t row = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& idx = out.indices[b];
    std::size_t i = 0;
    while (i < idx.size()) {
      const std::size_t frame = idx[i] / ppf;
      const auto g = static_cast<std::int32_t>(cls_pos.size());
      cls_pos.push_back(seq.size());
      group_sample.push_back(b);
      group_frame.push_back(frame);
      seq.push_back(kept_total);
      segment.push_back(g);
      for (; i < idx.size() && idx[i] / ppf == frame; ++i) {
        token_pos.push_back(seq.size());
        token_frame.push_back(frame);
        token_sample.push_back(static_cast<std::int32_t>(b));
        seq.push_back(row + i);
        segment.push_back(g);
      }
    }
    row += idx.size();
  }

  auto s = nx::gather(nx::concat(std::vector<nx::Tensor<T>>{x, params["vision.cls"]}, 0),
                      std::span<const std::size_t>(seq));
  s = norm(params, "vision.ln_pre", s);
  const nx::AttentionLayout frame_layout{segment, segment};
  for (std::size_t i = 0; i < config.vision_layers; ++i) {
    s = block(params, indexed("vision.block", i), s, config.vision_heads, frame_layout);
  }
  s = norm(params, "vision.ln_post", s);

  // Mean of per-frame class features over frames that kept any patch.
  const std::size_t groups = cls_pos.size();
  std::vector<std::size_t> frames_per_sample(batch, 0);
  for (auto b : group_sample) ++frames_per_sample[b];
  std::vector<T> avg(batch * groups, T(0));
  for (std::size_t g = 0; g < groups; ++g) {
    avg[group_sample[g] * groups + g] = T(1) / static_cast<T>(frames_per_sample[group_sample[g]]);
  }
  auto cls = nx::gather(s, std::span<const std::size_t>(cls_pos));
  auto pooled = nx::matmul(nx::Tensor<T>({batch, groups}, std::move(avg)), cls);

  if (config.has_temporal_block()) {
    const std::string t = "vision.temporal";
    auto tokens = nx::gather(s, std::span<const std::size_t>(token_pos));
    auto keys = nx::add(tokens, nx::gather(params[t + ".pos"], std::span<const std::size_t>(token_frame)));
    const std::vector<std::size_t> zero(batch, 0);
    auto h = nx::gather(params[t + ".query"], std::span<const std::size_t>(zero));
    std::vector<std::int32_t> q_segment(batch);
    std::iota(q_segment.begin(), q_segment.end(), 0);
    h = nx::add(h, mha(params, t + ".attn", norm(params, t + ".ln_q", h), norm(params, t + ".ln_kv", keys),
                       config.vision_heads, nx::AttentionLayout{q_segment, token_sample}));
    h = nx::add(h, mlp(params, t + ".mlp", norm(params, t + ".ln2", h)));
    pooled = nx::add(pooled, nx::linear(h, params[t + ".out.w"], params[t + ".out.b"]));

    // Time-ordered readout of the per-frame class features (zeros for frames
    // with no kept patch). Uniform attention pooling at init is blind to
    // frame order, so without this path the zero-initialised block sits on a
    // plateau where motion gets almost no gradient.
    const std::size_t d = config.embed_dim;
    std::vector<std::size_t> slot(batch * config.frames, groups);
    for (std::size_t g = 0; g < groups; ++g) slot[group_sample[g] * config.frames + group_frame[g]] = g;
    auto padded = nx::concat(std::vector<nx::Tensor<T>>{cls, nx::Tensor<T>::zeros({1, d})}, 0);
    auto timeline = nx::reshape(nx::gather(padded, std::span<const std::size_t>(slot)), {batch, config.frames * d});
    pooled = nx::add(pooled, nx::linear(timeline, params[t + ".frames.w"], params[t + ".frames.b"]));
  }
  out.pooled = nx::matmul(pooled, params["vision.proj"]);

  // Decoder-facing token table: pooled feature, then patch tokens by index.
  std::vector<std::size_t> table;
  table.reserve(batch + kept_total);
  out.offsets.push_back(0);
  std::size_t at = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    table.push_back(b);
    for (std::size_t i = 0; i < out.indices[b].size(); ++i) table.push_back(batch + token_pos[at + i]);
    at += out.indices[b].size();
    out.offsets.push_back(table.size());
  }
  out.tokens = nx::gather(nx::concat(std::vector<nx::Tensor<T>>{pooled, s}, 0),
                          std::span<const std::size_t>(table));
  return out;
}

template <typename T>
TextFeatures<T> encode_text(const ParamTree<T>& params, const ModelConfig& config,
                            std::span<const synthdata::TokenizedText> texts) {
  if (texts.empty()) throw nx::ShapeError("encode_text: empty batch");
  const std::size_t len = config.max_text_len;
  const std::size_t d = config.embed_dim;
  TextFeatures<T> out;
  out.batch = texts.size();
  out.length = len;
  out.ids.reserve(out.batch * len);
  std::vector<std::int32_t> q_segment, k_segment;
  std::vector<std::size_t> eos_rows;
  for (std::size_t b = 0; b < texts.size(); ++b) {
    const auto& ids = texts[b].ids;
    if (ids.size() != len) {
      throw nx::ShapeError("encode_text: sample " + std::to_string(b) + " has " +
                           std::to_string(ids.size()) + " ids, model expects " + std::to_string(len));
    }
    for (auto id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
        throw std::out_of_range("encode_text: token id " + std::to_string(id) + " outside vocabulary of " +
                                std::to_string(config.vocab_size));
      }
      out.ids.push_back(id);
      q_segment.push_back(static_cast<std::int32_t>(b));
      k_segment.push_back(id == synthdata::kPad ? -1 : static_cast<std::int32_t>(b));
    }
    eos_rows.push_back(b * len + texts[b].eos_position());
  }
  auto x = nx::embedding(params["text.token_embed"], std::span<const std::int32_t>(out.ids));
  x = nx::reshape(nx::add(nx::reshape(x, {out.batch, len, d}), params["text.pos"]), {out.batch * len, d});
  const nx::AttentionLayout layout{q_segment, k_segment};
  for (std::size_t i = 0; i < config.text_layers; ++i) {
    x = block(params, indexed("text.block", i), x, config.text_heads, layout);
  }
  out.tokens = norm(params, "text.ln_final", x);
  out.pooled = nx::matmul(nx::gather(out.tokens, std::span<const std::size_t>(eos_rows)), params["text.proj"]);
  return out;
}

template <typename T>
nx::Tensor<T> decode_hidden(const ParamTree<T>& params, const ModelConfig& config,
                            const TextFeatures<T>& text, const VisionFeatures<T>& video) {
  if (!config.with_decoder) throw std::logic_error("decode: model has no decoder");
  if (text.batch != video.batch()) {
    throw nx::ShapeError("decode: " + std::to_string(text.batch) + " texts but " +
                         std::to_string(video.batch()) + " videos");
  }
  const auto dd = config.decoder_dim;
  auto x = nx::linear(text.tokens, params["decoder.in_proj.w"], params["decoder.in_proj.b"]);
  auto mem = nx::linear(video.tokens, params["decoder.video_proj.w"], params["decoder.video_proj.b"]);
  if (x.dim(1) != dd || mem.dim(1) != dd) {
    throw nx::ShapeError("decode: projected widths " + std::to_string(x.dim(1)) + " (text) and " +
                         std::to_string(mem.dim(1)) + " (video) do not match decoder_dim " +
                         std::to_string(dd));
  }
  std::vector<std::int32_t> q_segment, k_self, k_cross;
  for (std::size_t i = 0; i < text.ids.size(); ++i) {
    const auto b = static_cast<std::int32_t>(i / text.length);
    q_segment.push_back(b);
    k_self.push_back(text.ids[i] == synthdata::kPad ? -1 : b);
  }
  for (std::size_t b = 0; b < video.batch(); ++b) {
    for (std::size_t r = video.offsets[b]; r < video.offsets[b + 1]; ++r) k_cross.push_back(static_cast<std::int32_t>(b));
  }
  const nx::AttentionLayout self_layout{q_segment, k_self};
  const nx::AttentionLayout cross_layout{q_segment, k_cross};
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    const auto pre = indexed("decoder.layer", i);
    auto h = norm(params, pre + ".ln1", x);
    x = nx::add(x, mha(params, pre + ".self_attn", h, h, config.decoder_heads, self_layout));
    x = nx::add(x, mha(params, pre + ".cross_attn", norm(params, pre + ".ln2", x), mem,
                       config.decoder_heads, cross_layout));
    x = nx::add(x, mlp(params, pre + ".mlp", norm(params, pre + ".ln3", x)));
  }
  return norm(params, "decoder.ln_final", x);
}

template <typename T>
nx::Tensor<T> vocab_logits(const ParamTree<T>& params, const nx::Tensor<T>& hidden) {
  auto h = nx::gelu(nx::linear(hidden, params["decoder.head.w1"], params["decoder.head.b1"]));
  return nx::linear(h, params["decoder.head.w2"], params["decoder.head.b2"]);
}

#define DROPCLIP_INSTANTIATE_MODEL(T)                                                              \
  template ParamTree<T> init_params<T>(const ModelConfig&, std::uint64_t, double);                 \
  template VisionFeatures<T> encode_video<T>(const ParamTree<T>&, const ModelConfig&,              \
                                             std::span<const masking::KeptPatches<T>>);            \
  template TextFeatures<T> encode_text<T>(const ParamTree<T>&, const ModelConfig&,                 \
                                          std::span<const synthdata::TokenizedText>);              \
  template nx::Tensor<T> decode_hidden<T>(const ParamTree<T>&, const ModelConfig&,                 \
                                          const TextFeatures<T>&, const VisionFeatures<T>&);       \
  template nx::Tensor<T> vocab_logits<T>(const ParamTree<T>&, const nx::Tensor<T>&);

DROPCLIP_INSTANTIATE_MODEL(float)
DROPCLIP_INSTANTIATE_MODEL(double)

}  // namespace dropclip::model
