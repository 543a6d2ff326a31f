// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/verify/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "dropclip/eval/retrieval.hpp"
#include "dropclip/masking/masking.hpp"
#include "dropclip/model/checkpoint.hpp"
#include "dropclip/model/model.hpp"
#include "dropclip/model/patchify.hpp"
#include "dropclip/numerics/grad_check.hpp"
#include "dropclip/util/kv_file.hpp"
#include "dropclip/util/rng.hpp"
#include "dropclip/wiseft/wiseft.hpp"

namespace dropclip::verify {

namespace nx = numerics;

namespace {

constexpr std::string_view kHashesHeader = "DROPCLIP-HASHES v1";

struct Outcome {
  bool passed;
  std::string detail;
};

class Suite {
 public:
  Suite(const VerifyOptions& options, std::ostream* progress) : options_(options), progress_(progress) {}

  bool enabled(const std::string& group) const { return options_.filter.empty() || options_.filter == group; }

  void check(const std::string& group, const std::string& name, const std::function<Outcome()>& fn) {
    if (!enabled(group)) return;
    CheckResult r{group, name, false, ""};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto o = fn();
      r.passed = o.passed;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (progress_ != nullptr) {
      char t[32];
      std::snprintf(t, sizeof(t), "%.2fs", dt);
      *progress_ << (r.passed ? "PASS " : "FAIL ") << group << "/" << name << " (" << t << ")"
                 << (r.detail.empty() ? "" : ": " + r.detail) << "\n"
                 << std::flush;
    }
    results_.push_back(std::move(r));
  }

  std::vector<CheckResult> take() { return std::move(results_); }

 private:
  const VerifyOptions& options_;
  std::ostream* progress_;
  std::vector<CheckResult> results_;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

nx::Tensor<double> random_tensor(util::Rng& rng, nx::Shape shape, double std = 1.0) {
  std::vector<double> d(nx::shape_size(shape));
  for (auto& x : d) x = std * rng.normal();
  return nx::Tensor<double>(std::move(shape), std::move(d));
}

// Random linear functional of an op's output: sum(w * y).
nx::Tensor<double> probe(const nx::Tensor<double>& y, std::uint64_t seed) {
  util::Rng rng(seed);
  return nx::sum_all(nx::mul(y, random_tensor(rng, y.shape())));
}

using OpCase = std::function<nx::Tensor<double>(std::span<const nx::Tensor<double>>)>;

struct OpSpec {
  const char* name;
  std::vector<nx::Shape> inputs;
  OpCase fn;
};

std::vector<OpSpec> op_specs() {
  using S = std::span<const nx::Tensor<double>>;
  std::vector<OpSpec> ops;
  ops.push_back({"matmul", {{2, 3, 4}, {4, 5}}, [](S x) { return nx::matmul(x[0], x[1]); }});
  ops.push_back({"matmul_batched", {{2, 3, 4}, {2, 4, 2}}, [](S x) { return nx::matmul(x[0], x[1]); }});
  ops.push_back({"add_broadcast", {{3, 4}, {4}}, [](S x) { return nx::add(x[0], x[1]); }});
  ops.push_back({"sub", {{3, 4}, {3, 4}}, [](S x) { return nx::sub(x[0], x[1]); }});
  ops.push_back({"mul", {{3, 4}, {4}}, [](S x) { return nx::mul(x[0], x[1]); }});
  ops.push_back({"scale", {{5}}, [](S x) { return nx::scale(x[0], 1.7); }});
  ops.push_back({"mul_scalar", {{2, 3}, {1}}, [](S x) { return nx::mul_scalar(x[0], x[1]); }});
  ops.push_back({"exp", {{6}}, [](S x) { return nx::exp(x[0]); }});
  ops.push_back({"transpose", {{2, 3, 4}}, [](S x) { return nx::transpose(x[0]); }});
  ops.push_back({"reshape", {{2, 6}}, [](S x) { return nx::reshape(x[0], {3, 4}); }});
  ops.push_back({"concat0", {{2, 3}, {1, 3}}, [](S x) { return nx::concat(std::vector{x[0], x[1]}, 0); }});
  ops.push_back({"concat1", {{2, 3}, {2, 2}}, [](S x) { return nx::concat(std::vector{x[0], x[1]}, 1); }});
  ops.push_back({"slice", {{4, 3}}, [](S x) { return nx::slice(x[0], 0, 1, 3); }});
  ops.push_back({"gather", {{4, 3}}, [](S x) {
                   const std::vector<std::size_t> idx{3, 0, 3, 1};
                   return nx::gather(x[0], std::span<const std::size_t>(idx));
                 }});
  ops.push_back({"embedding", {{5, 3}}, [](S x) {
                   const std::vector<std::int32_t> ids{4, 1, 1, 0};
                   return nx::embedding(x[0], std::span<const std::int32_t>(ids));
                 }});
  ops.push_back({"sum_axis", {{3, 4}}, [](S x) { return nx::sum(x[0], 1); }});
  ops.push_back({"mean_axis", {{3, 4}}, [](S x) { return nx::mean(x[0], 0); }});
  ops.push_back({"softmax", {{3, 5}}, [](S x) { return nx::softmax(x[0], 1); }});
  ops.push_back({"log_softmax", {{3, 5}}, [](S x) { return nx::log_softmax(x[0], 1); }});
  ops.push_back({"layer_norm", {{3, 6}, {6}, {6}}, [](S x) { return nx::layer_norm(x[0], x[1], x[2]); }});
  ops.push_back({"gelu", {{7}}, [](S x) { return nx::gelu(x[0]); }});
  ops.push_back({"l2_normalize", {{3, 4}}, [](S x) { return nx::l2_normalize(x[0]); }});
  ops.push_back({"attention", {{5, 4}, {6, 4}, {6, 4}}, [](S x) {
                   const nx::AttentionLayout layout{{0, 0, 1, 1, -1}, {0, 1, 0, 1, 1, -1}};
                   return nx::attention(x[0], x[1], x[2], 2, layout);
                 }});
  return ops;
}

double ops_max_error(const OpSpec& op, std::uint64_t seed) {
  util::Rng rng(util::mix_seed(seed, util::fnv1a(op.name)));
  std::vector<nx::Tensor<double>> leaves;
  for (const auto& s : op.inputs) leaves.push_back(random_tensor(rng, s));
  const auto probe_seed = rng.next();
  auto f = [&]() { return probe(op.fn(leaves), probe_seed); };
  return nx::grad_check(f, std::span<nx::Tensor<double>>(leaves)).max_rel_error;
}

nx::Tensor<double> unit_rows(std::vector<double> d, std::size_t cols) {
  const std::size_t rows = d.size() / cols;
  return nx::l2_normalize(nx::Tensor<double>({rows, cols}, std::move(d)));
}

// Pessimistic rank by full sort: among equal scores the correct candidate goes last.
std::vector<std::size_t> sorted_ranks(const eval::SimilarityMatrix& sim) {
  std::vector<std::size_t> ranks;
  for (std::size_t r = 0; r < sim.rows; ++r) {
    std::vector<std::size_t> order(sim.cols);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double sa = sim.at(r, a), sb = sim.at(r, b);
      if (sa != sb) return sa > sb;
      if ((a == sim.truth[r]) != (b == sim.truth[r])) return b == sim.truth[r];
      return a < b;
    });
    ranks.push_back(static_cast<std::size_t>(std::find(order.begin(), order.end(), sim.truth[r]) - order.begin()) + 1);
  }
  return ranks;
}

synthdata::VideoClip noise_clip(const model::ModelConfig& c, util::Rng& rng) {
  synthdata::VideoClip clip;
  clip.frames = c.frames;
  clip.height = c.height;
  clip.width = c.width;
  clip.pixels.resize(c.frames * c.height * c.width * 3);
  for (auto& p : clip.pixels) p = static_cast<float>(rng.uniform());
  return clip;
}

masking::KeptPatches<float> full_keep(const synthdata::VideoClip& clip, const model::ModelConfig& c) {
  std::vector<std::size_t> all(c.num_patches());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return {model::patchify<float>(clip, c.patch_size).tokens, all};
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
  return m;
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

const std::vector<std::string>& groups() {
  static const std::vector<std::string> g{"numerics", "masking", "wiseft", "retrieval", "model", "fixtures"};
  return g;
}

model::ModelConfig gradcheck_config() {
  model::ModelConfig c;
  c.embed_dim = 8;
  c.vision_layers = 2;
  c.vision_heads = 2;
  c.text_layers = 2;
  c.text_heads = 2;
  c.decoder_layers = 2;
  c.decoder_dim = 8;
  c.decoder_heads = 2;
  c.mlp_ratio = 2;
  c.patch_size = 4;
  c.frames = 2;
  c.height = 8;
  c.width = 8;
  c.vocab_size = 16;
  c.max_text_len = 6;
  c.proj_dim = 8;
  return c;
}

void randomize(model::ParamTree<double>& params, std::uint64_t seed, double std) {
  for (auto& [name, e] : params.entries()) {
    util::Rng rng(util::mix_seed(seed, util::fnv1a(name)));
    for (auto& x : e.value.mutable_data()) x = std * rng.normal();
  }
  // Keep the temperature moderate so logits stay in a well-conditioned range.
  params.at("logit_scale").mutable_data()[0] = 1.0;
}

train::PreparedBatch<double> gradcheck_batch(const model::ModelConfig& config, std::uint64_t seed) {
  util::Rng rng(seed);
  const masking::RngStreams streams(seed);
  train::PreparedBatch<double> batch;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto n = config.num_patches();
    auto tokens = random_tensor(rng, {n, config.patch_dim()}, 0.5);
    auto drop_rng = streams.stream(masking::RngStreams::kPatchDrop, 0, b);
    const auto mask = masking::sample_drop_mask(n, 0.5, drop_rng);
    const auto kept = masking::apply_drop(tokens, mask);
    batch.videos.push_back({kept.tokens.clone(), kept.indices});

    synthdata::TokenizedText text;
    const std::size_t words = 3 + b;
    text.ids.push_back(synthdata::kBos);
    for (std::size_t w = 0; w < words; ++w) {
      text.ids.push_back(static_cast<std::int32_t>(synthdata::kNumSpecial + rng.below(config.vocab_size - synthdata::kNumSpecial)));
    }
    text.ids.push_back(synthdata::kEos);
    text.ids.resize(config.max_text_len, synthdata::kPad);
    batch.texts.push_back(text);
    auto text_rng = streams.stream(masking::RngStreams::kTextMask, 0, b);
    batch.masked.push_back(masking::mask_text(text, 0.5, text_rng));
  }
  return batch;
}

model::ModelConfig golden_config() {
  model::ModelConfig c = gradcheck_config();
  c.frames = 1;
  c.backbone = model::Backbone::temporal;
  return c;
}

void write_golden_fixture(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto params = model::init_params<float>(golden_config(), kGoldenSeed);
  model::save_checkpoint(params, dir / "golden.ckpt");
  util::KvDocument doc{std::string(kHashesHeader)};
  doc.set("tree", hex(model::tree_hash(params)));
  for (const auto& [name, e] : params.entries()) doc.set("entry." + name, hex(model::payload_hash(e.value)));
  util::write_text_file(dir / "golden.hashes", doc.to_string());
  model::write_model_config(golden_config(), dir / "golden.cfg");
}

std::vector<CheckResult> run_verify(const VerifyOptions& options, std::ostream* progress) {
  if (!options.filter.empty() && std::find(groups().begin(), groups().end(), options.filter) == groups().end()) {
    throw std::invalid_argument("verify: unknown group '" + options.filter + "'");
  }
  Suite s(options, progress);

  // numerics ---------------------------------------------------------------
  s.check("numerics", "op_gradients_10_seeds", [] {
    double worst = 0.0;
    std::string where;
    for (const auto& op : op_specs()) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const double e = ops_max_error(op, seed);
        if (e > worst) {
          worst = e;
          where = op.name;
        }
      }
    }
    return Outcome{worst < 1e-5, "max rel error " + num(worst) + (where.empty() ? "" : " (" + where + ")")};
  });
  s.check("numerics", "softmax_rows_and_unit_norms", [] {
    util::Rng rng(5);
    std::vector<float> d(40);
    for (auto& x : d) x = static_cast<float>(3.0 * rng.normal());
    const nx::Tensor<float> x({8, 5}, d);
    const auto sm = nx::softmax(x, 1);
    const auto un = nx::l2_normalize(x);
    double worst = 0.0;
    for (std::size_t r = 0; r < 8; ++r) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        s1 += sm.data()[r * 5 + c];
        s2 += double(un.data()[r * 5 + c]) * un.data()[r * 5 + c];
      }
      worst = std::max({worst, std::abs(s1 - 1.0), std::abs(std::sqrt(s2) - 1.0)});
    }
    return Outcome{worst < 1e-6, "max deviation " + num(worst)};
  });
  s.check("numerics", "info_nce_analytic", [] {
    const auto zero = nx::Tensor<double>({1}, {0.0});
    const double b1 = train::info_nce(unit_rows({1, 2}, 2), unit_rows({3, 1}, 2), zero).item();
    const double lnb = train::info_nce(unit_rows(std::vector<double>(8, 1.0), 2),
                                       unit_rows(std::vector<double>(8, 1.0), 2), zero).item();
    const double two = train::info_nce(unit_rows({1, 0, 0, 1}, 2), unit_rows({1, 0, 0, 1}, 2), zero).item();
    const double want = std::log(1.0 + std::exp(-1.0));
    const bool ok = b1 == 0.0 && std::abs(lnb - std::log(4.0)) < 1e-6 && std::abs(two - want) < 1e-6;
    return Outcome{ok, "B=1 " + num(b1) + ", const " + num(lnb) + ", 2x2 " + num(two)};
  });
  s.check("numerics", "info_nce_gradient", [] {
    util::Rng rng(11);
    std::vector<nx::Tensor<double>> leaves{random_tensor(rng, {4, 8}), random_tensor(rng, {4, 8}),
                                           nx::Tensor<double>({1}, {0.3})};
    auto f = [&]() { return train::info_nce(nx::l2_normalize(leaves[0]), nx::l2_normalize(leaves[1]), leaves[2]); };
    const auto r = nx::grad_check(f, std::span<nx::Tensor<double>>(leaves));
    return Outcome{r.max_rel_error < 1e-5, "max rel error " + num(r.max_rel_error)};
  });
  s.check("numerics", "joint_loss_gradient_full_model", [] {
    const auto config = gradcheck_config();
    auto params = model::init_params<double>(config, 3);
    randomize(params, 3, 0.3);
    const auto batch = gradcheck_batch(config, 3);
    std::vector<nx::Tensor<double>> leaves;
    for (auto& [_, e] : params.entries()) leaves.push_back(e.value);
    auto f = [&]() { return train::joint_loss(params, config, batch, 1.0).total; };
    const auto r = nx::grad_check(f, std::span<nx::Tensor<double>>(leaves));
    return Outcome{r.max_rel_error < 1e-4,
                   "max rel error " + num(r.max_rel_error) + " over " + std::to_string(r.coordinates) + " coordinates"};
  });

  // masking ----------------------------------------------------------------
  s.check("masking", "keep_count_floor_rule", [] {
    for (std::size_t n : {1, 10, 128, 1568}) {
      for (int tenths : {0, 7, 8, 9}) {
        const std::size_t want = std::max<std::size_t>(1, n * static_cast<std::size_t>(10 - tenths) / 10);
        util::Rng rng(n * 10 + static_cast<std::size_t>(tenths));
        const auto m = masking::sample_drop_mask(n, tenths / 10.0, rng);
        if (m.kept.size() != want || !std::is_sorted(m.kept.begin(), m.kept.end())) {
          return Outcome{false, "N=" + std::to_string(n) + " rho=0." + std::to_string(tenths) + " kept " +
                                    std::to_string(m.kept.size()) + ", want " + std::to_string(want)};
        }
      }
    }
    return Outcome{masking::keep_count(1568, 0.9) == 156, "16 (N, rho) cases"};
  });
  s.check("masking", "keep_frequency_uniform", [] {
    const masking::RngStreams streams(17);
    std::vector<std::size_t> hits(10, 0);
    for (std::size_t t = 0; t < 10000; ++t) {
      auto rng = streams.stream(masking::RngStreams::kPatchDrop, t);
      for (auto i : masking::sample_drop_mask(10, 0.5, rng).kept) ++hits[i];
    }
    const auto [lo, hi] = std::minmax_element(hits.begin(), hits.end());
    return Outcome{*lo >= 4700 && *hi <= 5300, "keep frequency range [" + num(*lo / 1e4) + ", " + num(*hi / 1e4) + "]"};
  });
  s.check("masking", "mask_count_rule", [] {
    auto text = [](std::size_t words) {
      synthdata::TokenizedText t;
      t.ids.push_back(synthdata::kBos);
      for (std::size_t i = 0; i < words; ++i) t.ids.push_back(4);
      t.ids.push_back(synthdata::kEos);
      t.ids.push_back(synthdata::kPad);
      return t;
    };
    util::Rng rng(1);
    const auto five = masking::mask_text(text(5), 0.15, rng).targets.size();
    const auto twenty = masking::mask_text(text(20), 0.15, rng).targets.size();
    const auto none = masking::mask_text(text(5), 0.0, rng).targets.size();
    return Outcome{five == 1 && twenty == 3 && none == 0,
                   "5 words -> " + std::to_string(five) + ", 20 words -> " + std::to_string(twenty)};
  });
  s.check("masking", "stream_determinism", [] {
    const masking::RngStreams streams(99);
    auto a = streams.stream(masking::RngStreams::kPatchDrop, 3, 4);
    auto other = streams.stream(masking::RngStreams::kTextMask, 3, 4);
    (void)other.next();
    auto b = streams.stream(masking::RngStreams::kPatchDrop, 3, 4);
    return Outcome{masking::sample_drop_mask(128, 0.9, a) == masking::sample_drop_mask(128, 0.9, b), ""};
  });

  // wiseft -------------------------------------------------------------------
  auto scalar_tree = [](float v) {
    model::ParamTree<float> t;
    t.add("x", nx::Tensor<float>({1}, {v}));
    return t;
  };
  s.check("wiseft", "alg1_indices", [] {
    using V = std::vector<std::size_t>;
    const bool ok = wiseft::alg1_indices(10, 3) == V{0, 5, 10} && wiseft::alg1_indices(4, 2) == V{0, 4} &&
                    wiseft::alg1_indices(5, 3) == V{0, 3, 5};
    return Outcome{ok, ""};
  });
  s.check("wiseft", "hand_trace_k2_l2", [&] {
    const wiseft::WiseFtSchedule schedule(2, 2);
    wiseft::CheckpointSeries<float> series;
    series.push(scalar_tree(0.0f));
    float x = 0.0f;
    for (std::size_t n = 1; n <= 4; ++n) {
      x += 1.0f;
      series.push(scalar_tree(x));
      x = wiseft::wise_ft_online(series, schedule, n)["x"].item();
    }
    return Outcome{x == 1.5f && series.at(2)["x"].item() == 1.0f, "final " + num(x)};
  });
  s.check("wiseft", "single_firing_equals_classic", [] {
    const auto config = golden_config();
    const auto pre = model::init_params<float>(config, 1);
    const auto ft = model::init_params<float>(config, 2);
    wiseft::CheckpointSeries<float> series;
    series.push(pre.clone());
    series.push(ft.clone());
    const auto online = wiseft::wise_ft_online(series, wiseft::WiseFtSchedule(1, 2), 1);
    const auto classic = wiseft::classic_wise_ft(pre, ft, 0.5);
    const bool ends = wiseft::classic_wise_ft(pre, ft, 0.0).identical(pre) &&
                      wiseft::classic_wise_ft(pre, ft, 1.0).identical(ft);
    return Outcome{online.identical(classic) && ends, ""};
  });

  // retrieval -----------------------------------------------------------------
  s.check("retrieval", "brute_force_oracle_100x50x50", [] {
    util::Rng rng(23);
    for (int t = 0; t < 100; ++t) {
      eval::SimilarityMatrix sim;
      sim.rows = sim.cols = 50;
      for (std::size_t i = 0; i < 2500; ++i) sim.scores.push_back(std::round(rng.normal() * 4.0) / 4.0);
      for (std::size_t r = 0; r < 50; ++r) sim.truth.push_back(rng.below(50));
      auto ranks = sorted_ranks(sim);
      if (ranks != eval::retrieval_ranks(sim)) return Outcome{false, "rank mismatch on matrix " + std::to_string(t)};
      const auto got = eval::retrieval_eval(sim);
      auto within = [&](std::size_t k) {
        return 100.0 * static_cast<double>(std::count_if(ranks.begin(), ranks.end(), [k](auto x) { return x <= k; })) / 50.0;
      };
      std::sort(ranks.begin(), ranks.end());
      const double mdr = 0.5 * static_cast<double>(ranks[24] + ranks[25]);
      if (got.r1 != within(1) || got.r5 != within(5) || got.r10 != within(10) || got.median_rank != mdr) {
        return Outcome{false, "metric mismatch on matrix " + std::to_string(t)};
      }
    }
    return Outcome{true, ""};
  });
  s.check("retrieval", "hand_examples", [] {
    eval::SimilarityMatrix ranks_1357;
    ranks_1357.rows = 4;
    ranks_1357.cols = 8;
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 8; ++c) ranks_1357.scores.push_back(c < 2 * r ? 1.0 : 0.0);
      ranks_1357.truth.push_back(7);
      ranks_1357.scores[r * 8 + 7] = 0.5;
    }
    const auto a = eval::retrieval_eval(ranks_1357);
    eval::SimilarityMatrix flat;
    flat.rows = flat.cols = 10;
    flat.scores.assign(100, 0.25);
    for (std::size_t r = 0; r < 10; ++r) flat.truth.push_back(r);
    const auto b = eval::retrieval_eval(flat);
    const bool ok = a.r1 == 25.0 && a.r5 == 75.0 && a.median_rank == 4.0 && b.r10 == 100.0 && b.r5 == 0.0;
    return Outcome{ok, "R@1 " + num(a.r1) + " R@5 " + num(a.r5) + " MdR " + num(a.median_rank)};
  });

  // model ---------------------------------------------------------------------
  s.check("model", "zero_init_equivalence_100_clips", [] {
    model::ModelConfig temporal;
    auto flat = temporal;
    flat.backbone = model::Backbone::frame_avg;
    const auto params = model::init_params<float>(temporal, 7);
    util::Rng rng(8);
    double worst = 0.0;
    for (int chunk = 0; chunk < 5; ++chunk) {
      std::vector<masking::KeptPatches<float>> videos;
      for (int i = 0; i < 20; ++i) videos.push_back(full_keep(noise_clip(temporal, rng), temporal));
      nx::NoGradScope<float> no_grad;
      const std::span<const masking::KeptPatches<float>> v(videos);
      const auto a = model::encode_video(params, temporal, v);
      const auto b = model::encode_video(params, flat, v);
      worst = std::max(worst, max_abs_diff(a.pooled.data(), b.pooled.data()));
    }
    return Outcome{worst < 1e-6, "max abs diff " + num(worst)};
  });
  s.check("model", "storage_order_invariance", [] {
    model::ModelConfig config;
    const auto params = model::init_params<float>(config, 9);
    util::Rng rng(10);
    const auto patches = model::patchify<float>(noise_clip(config, rng), config.patch_size);
    auto mask_rng = rng;
    const auto mask = masking::sample_drop_mask(config.num_patches(), 0.7, mask_rng);
    const auto kept = masking::apply_drop(patches.tokens, mask);
    std::vector<std::size_t> perm(kept.indices.size());
    std::iota(perm.rbegin(), perm.rend(), std::size_t{0});
    masking::KeptPatches<float> shuffled{nx::gather(kept.tokens, std::span<const std::size_t>(perm)), {}};
    for (auto p : perm) shuffled.indices.push_back(kept.indices[p]);
    nx::NoGradScope<float> no_grad;
    const auto a = model::encode_video(params, config, std::span<const masking::KeptPatches<float>>(&kept, 1));
    const auto b = model::encode_video(params, config, std::span<const masking::KeptPatches<float>>(&shuffled, 1));
    return Outcome{max_abs_diff(a.pooled.data(), b.pooled.data()) == 0.0, ""};
  });
  s.check("model", "checkpoint_round_trip", [] {
    const auto params = model::init_params<float>(model::ModelConfig{}, 12);
    const auto back = model::decode_checkpoint(model::encode_checkpoint(params));
    return Outcome{back.identical(params), std::to_string(params.size()) + " entries"};
  });

  // fixtures ------------------------------------------------------------------
  s.check("fixtures", "golden_checkpoint_hashes", [&] {
    const auto dir = options.fixture_dir;
    const auto params = model::load_checkpoint(dir / "golden.ckpt", golden_config());
    const auto doc = util::read_kv_file(dir / "golden.hashes", kHashesHeader);
    for (const auto& [name, e] : params.entries()) {
      if (doc.require("entry." + name) != hex(model::payload_hash(e.value))) {
        return Outcome{false, "payload hash mismatch for '" + name + "'"};
      }
    }
    if (doc.require("tree") != hex(model::tree_hash(params))) return Outcome{false, "tree hash mismatch"};
    return Outcome{true, std::to_string(params.size()) + " entries"};
  });
  s.check("fixtures", "golden_init_reproduces", [&] {
    const auto file = util::read_text_file(options.fixture_dir / "golden.ckpt");
    const auto fresh = model::encode_checkpoint(model::init_params<float>(golden_config(), kGoldenSeed));
    return Outcome{file == fresh, file == fresh ? "" : "init_params no longer reproduces the golden bytes"};
  });

  return s.take();
}

}  // namespace dropclip::verify
