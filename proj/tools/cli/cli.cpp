// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include "dropclip/eval/bench.hpp"
#include "dropclip/model/checkpoint.hpp"
#include "dropclip/model/model.hpp"
#include "dropclip/pipeline/run_config.hpp"
#include "dropclip/pipeline/tasks.hpp"
#include "dropclip/synthdata/dataset.hpp"
#include "dropclip/train/trainer.hpp"
#include "dropclip/util/dir_lock.hpp"
#include "dropclip/util/kv_file.hpp"
#include "dropclip/util/parallel.hpp"
#include "dropclip/verify/verify.hpp"
#include "dropclip/wiseft/wiseft.hpp"

#ifndef DROPCLIP_FIXTURE_DIR
#define DROPCLIP_FIXTURE_DIR "tests/fixtures"
#endif

namespace dropclip::cli {

namespace fs = std::filesystem;
namespace sd = synthdata;

namespace {

// Bad flags, unreadable config files and inconsistent settings: exit 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename F>
auto resolve(F&& fn) {
  try {
    return fn();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

const char* env_lookup(const char* name) { return std::getenv(name); }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw UsageError("empty item in list '" + text + "'");
    out.push_back(item);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::vector<std::size_t> parse_indices(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(text)) {
    const auto v = util::parse_int("indices", s);
    if (v < 0) throw UsageError("indices must be non-negative");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void ensure_unlocked(const fs::path& dir) {
  if (fs::exists(dir / ".lock")) {
    throw util::LockedError("output directory " + dir.string() + " is locked by another run (" +
                            (dir / ".lock").string() + ")");
  }
}

// --- gen-data / dump ----------------------------------------------------------

struct GenDataFlags {
  std::string out;
  std::string style = "motion";
  std::size_t count = 4096;
  std::size_t eval_count = 256;
  std::uint64_t seed = 7;
  std::optional<std::size_t> frames;
  std::size_t size = 32;
};

void add_gen_data(CLI::App& app, GenDataFlags& f) {
  app.add_option("--out", f.out, "Directory for train/val/test manifests")->required();
  app.add_option("--style", f.style, "Caption style: motion or static")->check(CLI::IsMember({"motion", "static"}));
  app.add_option("--count", f.count, "Training samples")->capture_default_str();
  app.add_option("--eval-count", f.eval_count, "Samples in val and test")->capture_default_str();
  app.add_option("--seed", f.seed, "Master seed (val/test use seed+1, seed+2)")->capture_default_str();
  app.add_option("--frames", f.frames, "Frames per clip (default 8 for motion, 1 for static)");
  app.add_option("--size", f.size, "Frame height and width")->capture_default_str();
}

int cmd_gen_data(const GenDataFlags& f, std::ostream& out) {
  const auto base = resolve([&] {
    sd::DatasetManifest m;
    m.style = sd::parse_caption_style(f.style);
    m.count = f.count;
    m.seed = f.seed;
    m.frames = f.frames.value_or(m.style == sd::CaptionStyle::motion ? 8 : 1);
    m.height = m.width = f.size;
    m.validate();
    return m;
  });
  fs::create_directories(f.out);
  for (const char* split : {"train", "val", "test"}) {
    auto m = sd::split_manifest(base, split);
    if (std::string_view(split) != "train") m.count = f.eval_count;
    const auto path = fs::path(f.out) / (std::string(split) + ".manifest");
    sd::write_manifest(m, path);
    out << "wrote " << path.string() << " (" << m.count << " " << sd::name(m.style) << " samples)\n";
  }
  return kExitOk;
}

struct DumpFlags {
  std::string manifest;
  std::string out;
};

int cmd_dump(const DumpFlags& f, std::ostream& out) {
  const auto m = sd::read_manifest(f.manifest);
  sd::dump_captions(m, f.out);
  out << "wrote " << m.count << " captions to " << f.out << "\n";
  return kExitOk;
}

// --- pretrain / post-pretrain ------------------------------------------------------

struct TrainFlags {
  std::string config;
  std::string preset = "desk";
  std::optional<std::string> manifest, init, out;
  std::optional<std::size_t> steps, batch_size, warmup, threads, resume;
  std::optional<double> lr, weight_decay, drop_ratio, mask_ratio, mask_weight;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backbone, wise_ft;
  bool no_decoder = false;
  bool train_text = false;
  bool verbose = false;
};

void add_train_flags(CLI::App& app, TrainFlags& f, pipeline::Stage stage) {
  app.add_option("--manifest", f.manifest, "Training split manifest");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--config", f.config, "run.cfg to start from (flags still win)");
  app.add_option("--preset", f.preset, "Hyperparameter preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--steps", f.steps, "Optimisation steps");
  app.add_option("--batch-size", f.batch_size, "Pairs per step");
  app.add_option("--lr", f.lr, "Peak learning rate");
  app.add_option("--warmup", f.warmup, "Linear warmup steps");
  app.add_option("--weight-decay", f.weight_decay, "Decoupled weight decay");
  app.add_option("--seed", f.seed, "Seed for init, data order, dropping and masking");
  app.add_option("--threads", f.threads, "Worker threads for evaluation passes");
  app.add_flag("--verbose", f.verbose, "Print one metrics line per step");
  if (stage == pipeline::Stage::post_pretrain) {
    app.add_option("--init", f.init, "Stage-0 checkpoint to start from");
    app.add_option("--drop-ratio", f.drop_ratio, "Fraction of video patches dropped per clip (default 0.9)");
    app.add_option("--mask-ratio", f.mask_ratio, "Fraction of caption words masked (default 0.15)");
    app.add_option("--mask-weight", f.mask_weight, "Weight of the masked-token loss (default 1)");
    app.add_option("--backbone", f.backbone, "temporal or frame_avg")->check(CLI::IsMember({"temporal", "frame_avg"}));
    app.add_option("--wise-ft", f.wise_ft, "Online WiSE-FT schedule k,l or 'off' (default 10,3)");
    app.add_flag("--no-decoder", f.no_decoder, "Drop the fusion decoder and the masked-token loss");
    app.add_flag("--train-text", f.train_text, "Keep the text encoder trainable");
    app.add_option("--resume", f.resume, "Continue from the snapshot saved after this epoch");
  }
}

pipeline::RunConfig resolve_run_config(const TrainFlags& f, pipeline::Stage stage) {
  return resolve([&] {
    auto c = pipeline::defaults_for(stage);
    if (f.preset == "paper") pipeline::apply_paper_preset(c);
    if (!f.config.empty()) {
      c = pipeline::read_run_config(f.config, c);
      if (c.stage != stage) {
        throw UsageError(f.config + " describes a " + std::string(pipeline::name(c.stage)) + " run");
      }
    }
    pipeline::apply_environment(c, env_lookup);
    if (f.manifest) c.manifest = *f.manifest;
    if (f.init) c.init = *f.init;
    if (f.out) c.output_dir = *f.out;
    if (f.steps) c.train.steps = *f.steps;
    if (f.batch_size) c.train.batch_size = *f.batch_size;
    if (f.warmup) c.train.warmup = *f.warmup;
    if (f.lr) c.train.lr = *f.lr;
    if (f.weight_decay) c.train.weight_decay = *f.weight_decay;
    if (f.seed) c.train.seed = *f.seed;
    if (f.threads) c.threads = *f.threads;
    if (f.drop_ratio) c.train.drop_ratio = *f.drop_ratio;
    if (f.mask_ratio) c.train.mask_ratio = *f.mask_ratio;
    if (f.mask_weight) c.train.mask_weight = *f.mask_weight;
    if (f.backbone) c.model.backbone = model::parse_backbone(*f.backbone);
    if (f.wise_ft) {
      if (*f.wise_ft == "off") {
        c.wise_ft.reset();
      } else {
        c.wise_ft = pipeline::parse_schedule(*f.wise_ft);
      }
    }
    if (f.no_decoder) {
      c.model.with_decoder = false;
      c.train.mask_weight = 0.0;
    }
    if (f.train_text) c.train.freeze_text = false;
    if (c.manifest.empty()) throw UsageError("--manifest is required");
    if (c.output_dir.empty()) throw UsageError("--out is required");
    if (stage == pipeline::Stage::post_pretrain && c.init.empty()) throw UsageError("--init is required");
    c.validate();
    return c;
  });
}

int cmd_train(const TrainFlags& f, pipeline::Stage stage, std::ostream& out) {
  const auto c = resolve_run_config(f, stage);
  const auto data = resolve([&] { return sd::read_manifest(c.manifest); });
  if (stage == pipeline::Stage::post_pretrain && !fs::exists(c.init)) {
    throw std::runtime_error("init checkpoint " + c.init.string() + " does not exist");
  }
  util::set_worker_threads(c.threads);
  fs::create_directories(c.output_dir);
  ensure_unlocked(c.output_dir);
  pipeline::write_run_config(c, c.output_dir / "run.cfg");

  const train::TrainingJob job{c.model, c.train, data, c.wise_ft, c.output_dir};
  std::ostream* log = f.verbose ? &out : nullptr;
  train::TrainingResult result;
  if (f.resume) {
    result = train::resume_training(job, *f.resume, log);
  } else {
    const auto init = stage == pipeline::Stage::pretrain
                          ? model::init_params<float>(c.model, c.train.seed)
                          : model::adapt_params(model::load_checkpoint(c.init), c.model, c.train.seed);
    result = train::run_training(job, init, log);
  }
  const auto final_path = c.output_dir / "final.ckpt";
  model::save_checkpoint(result.series.at(result.series.size() - 1), final_path);

  out << pipeline::name(stage) << ": " << result.losses.size() << " steps, " << result.series.size() - 1
      << " epochs\n";
  if (!result.losses.empty()) {
    const auto& last = result.losses.back();
    out << "final losses: l_con=" << util::format_double(last.contrastive)
        << " l_mask=" << util::format_double(last.masked) << "\n";
  }
  if (!result.ensembled_epochs.empty()) {
    out << "WiSE-FT applied after epochs:";
    for (auto e : result.ensembled_epochs) out << " " << e;
    out << "\n";
  }
  out << "wrote " << final_path.string() << "\n";
  return kExitOk;
}

// --- eval --------------------------------------------------------------------------

inline constexpr std::string_view kEvalConfigHeader = "DROPCLIP-EVAL v1";

struct EvalFlags {
  std::string config;
  std::optional<std::string> checkpoint, model_config, manifest, reference, task, mode, seeds, choices, out;
  std::optional<std::size_t> limit, threads;
  std::optional<double> mask_ratio;
  std::optional<std::uint64_t> seed;
};

struct EvalConfig {
  fs::path checkpoint, model_config, manifest, reference, output_dir;
  std::string task = "retrieval";
  std::string mode = "combined";
  std::string seeds = "0,1,2";
  std::string choices = "left,right";
  std::size_t limit = 0;
  double mask_ratio = 0.15;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  util::KvDocument doc() const {
    util::KvDocument d{std::string(kEvalConfigHeader)};
    d.set("checkpoint", checkpoint.string());
    d.set("model_config", model_config.string());
    d.set("manifest", manifest.string());
    d.set("reference", reference.string());
    d.set("output_dir", output_dir.string());
    d.set("task", task);
    d.set("mode", mode);
    d.set("seeds", seeds);
    d.set("choices", choices);
    d.set("limit", std::to_string(limit));
    d.set("mask_ratio", util::format_double(mask_ratio));
    d.set("seed", std::to_string(seed));
    d.set("threads", std::to_string(threads));
    return d;
  }

  void load(const util::KvDocument& d) {
    const auto current = doc();
    std::map<std::string, std::string> known;
    for (const auto& [k, v] : current.entries()) known[k] = v;
    for (const auto& [k, v] : d.entries()) {
      if (!known.contains(k)) throw util::FormatError("eval config: unknown key '" + k + "'");
    }
    auto str = [&](const char* k, auto& field) {
      if (const auto* v = d.find(k)) field = *v;
    };
    auto num = [&](const char* k, auto& field) {
      if (const auto* v = d.find(k)) {
        const auto n = util::parse_int(k, *v);
        if (n < 0) throw util::FormatError(std::string("key '") + k + "': must be non-negative");
        field = static_cast<std::remove_reference_t<decltype(field)>>(n);
      }
    };
    str("checkpoint", checkpoint);
    str("model_config", model_config);
    str("manifest", manifest);
    str("reference", reference);
    str("output_dir", output_dir);
    str("task", task);
    str("mode", mode);
    str("seeds", seeds);
    str("choices", choices);
    num("limit", limit);
    if (const auto* v = d.find("mask_ratio")) mask_ratio = util::parse_double("mask_ratio", *v);
    num("seed", seed);
    num("threads", threads);
  }
};

void add_eval_flags(CLI::App& app, EvalFlags& f) {
  app.add_option("--checkpoint", f.checkpoint, "Checkpoint to evaluate");
  app.add_option("--model-config", f.model_config, "Model config (default: model.cfg beside the checkpoint)");
  app.add_option("--manifest", f.manifest, "Evaluation split manifest");
  app.add_option("--task", f.task, "retrieval, multiple-choice, classify, vqa or masked-tokens")
      ->check(CLI::IsMember({"retrieval", "multiple-choice", "classify", "vqa", "masked-tokens"}));
  app.add_option("--mode", f.mode, "vqa features: alignment, fusion or combined")
      ->check(CLI::IsMember({"alignment", "fusion", "combined"}));
  app.add_option("--reference", f.reference, "vqa: answer-head training split; masked-tokens: prior corpus");
  app.add_option("--seeds", f.seeds, "vqa: comma-separated head seeds");
  app.add_option("--choices", f.choices, "multiple-choice: comma-separated directions");
  app.add_option("--limit", f.limit, "samples to evaluate; multiple-choice counts qualifying clips (0 = all)");
  app.add_option("--mask-ratio", f.mask_ratio, "masked-tokens: fraction of words masked");
  app.add_option("--seed", f.seed, "masked-tokens: masking seed");
  app.add_option("--threads", f.threads, "Worker threads for encoding");
  app.add_option("--out", f.out, "Directory for <task>.txt, <task>.records and eval.cfg");
  app.add_option("--config", f.config, "eval.cfg to start from (flags still win)");
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  auto [c, request] = resolve([&] {
    EvalConfig c;
    if (!f.config.empty()) c.load(util::read_kv_file(f.config, kEvalConfigHeader));
    if (const char* v = env_lookup("DROPCLIP_THREADS")) {
      const auto n = util::parse_int("DROPCLIP_THREADS", v);
      if (n < 1) throw UsageError("DROPCLIP_THREADS must be at least 1");
      c.threads = static_cast<std::size_t>(n);
    }
    if (const char* v = env_lookup("DROPCLIP_SEED")) {
      const auto n = util::parse_int("DROPCLIP_SEED", v);
      if (n < 0) throw UsageError("DROPCLIP_SEED must be non-negative");
      c.seed = static_cast<std::uint64_t>(n);
    }
    if (f.checkpoint) c.checkpoint = *f.checkpoint;
    if (f.model_config) c.model_config = *f.model_config;
    if (f.manifest) c.manifest = *f.manifest;
    if (f.reference) c.reference = *f.reference;
    if (f.task) c.task = *f.task;
    if (f.mode) c.mode = *f.mode;
    if (f.seeds) c.seeds = *f.seeds;
    if (f.choices) c.choices = *f.choices;
    if (f.limit) c.limit = *f.limit;
    if (f.mask_ratio) c.mask_ratio = *f.mask_ratio;
    if (f.seed) c.seed = *f.seed;
    if (f.threads) c.threads = *f.threads;
    if (f.out) c.output_dir = *f.out;
    if (c.checkpoint.empty()) throw UsageError("--checkpoint is required");
    if (c.manifest.empty()) throw UsageError("--manifest is required");
    if (c.threads == 0) throw UsageError("--threads must be at least 1");
    if (c.model_config.empty()) c.model_config = c.checkpoint.parent_path() / "model.cfg";

    pipeline::EvalRequest r;
    r.task = pipeline::parse_eval_task(c.task);
    r.mode = eval::parse_vqa_mode(c.mode);
    r.seeds.clear();
    for (auto s : parse_indices(c.seeds)) r.seeds.push_back(s);
    r.choices.clear();
    for (const auto& s : split_list(c.choices)) {
      const auto it = std::find_if(sd::kDirections.begin(), sd::kDirections.end(),
                                   [&](sd::Motion m) { return sd::name(m) == s; });
      if (it == sd::kDirections.end()) throw UsageError("unknown direction '" + s + "'");
      r.choices.push_back(*it);
    }
    r.limit = c.limit;
    r.mask_ratio = c.mask_ratio;
    r.seed = c.seed;
    if ((r.task == pipeline::EvalTask::vqa || r.task == pipeline::EvalTask::masked_tokens) && c.reference.empty()) {
      throw UsageError("--reference is required for --task " + c.task);
    }
    return std::pair{c, r};
  });

  const auto config = model::read_model_config(c.model_config);
  const auto params = model::load_checkpoint(c.checkpoint, config);
  request.split = sd::read_manifest(c.manifest);
  if (!c.reference.empty()) request.reference = sd::read_manifest(c.reference);
  if (request.task == pipeline::EvalTask::vqa && request.mode != eval::VqaFeatureMode::alignment &&
      !config.with_decoder) {
    throw std::runtime_error("--task vqa --mode " + c.mode + " needs a checkpoint trained with the decoder");
  }
  if (request.task == pipeline::EvalTask::masked_tokens && !config.with_decoder) {
    throw std::runtime_error("--task masked-tokens needs a checkpoint trained with the decoder");
  }
  util::set_worker_threads(c.threads);

  std::optional<util::DirLock> lock;
  if (!c.output_dir.empty()) {
    fs::create_directories(c.output_dir);
    lock.emplace(c.output_dir);
  }
  const auto report = pipeline::run_eval(params, config, request);
  out << report.text();
  if (lock) {
    util::write_text_file(c.output_dir / "eval.cfg", c.doc().to_string());
    util::write_text_file(c.output_dir / (c.task + ".txt"), report.text());
    util::write_text_file(c.output_dir / (c.task + ".records"), report.records());
  }
  return kExitOk;
}

// --- wiseft ------------------------------------------------------------------------

struct WiseFtFlags {
  std::string dir;
  std::optional<std::string> schedule, indices;
  std::string out;
};

int cmd_wiseft(const WiseFtFlags& f, std::ostream& out) {
  const auto [schedule, indices] = resolve([&] {
    if (f.schedule.has_value() == f.indices.has_value()) {
      throw UsageError("give exactly one of --schedule k,l and --indices i,j,...");
    }
    std::optional<wiseft::WiseFtSchedule> s;
    std::vector<std::size_t> idx;
    if (f.schedule) s = pipeline::parse_schedule(*f.schedule);
    if (f.indices) idx = parse_indices(*f.indices);
    return std::pair{s, idx};
  });

  // Snapshots must be theta_000 .. theta_N without gaps.
  const std::regex pattern(R"(theta_(\d+)\.ckpt)");
  std::size_t found = 0, last = 0;
  for (const auto& e : fs::directory_iterator(f.dir)) {
    std::smatch m;
    const auto file = e.path().filename().string();
    if (std::regex_match(file, m, pattern)) {
      ++found;
      last = std::max(last, static_cast<std::size_t>(std::stoull(m[1].str())));
    }
  }
  if (found < 2) {
    throw std::runtime_error(f.dir + " holds " + std::to_string(found) + " snapshot(s); ensembling needs at least 2");
  }
  if (found != last + 1) {
    throw std::runtime_error(f.dir + ": snapshots are not contiguous from theta_000 to theta_" + std::to_string(last));
  }
  wiseft::CheckpointSeries<float> series;
  for (std::size_t n = 0; n <= last; ++n) series.push(model::load_checkpoint(train::snapshot_path(f.dir, n)));
  for (std::size_t n = 1; n <= last; ++n) series.at(0).check_same_structure(series.at(n));

  model::ParamTree<float> result;
  if (schedule) {
    // Replay the online rule: every k-th snapshot is replaced by its ensemble,
    // and later firings see the replaced values.
    std::size_t fired = 0;
    for (std::size_t n = schedule->k(); n <= last; n += schedule->k()) {
      const auto used = wiseft::alg1_indices(n, schedule->l());
      out << "epoch " << n << ": averaged";
      for (auto i : used) out << " " << i;
      out << "\n";
      result = wiseft::wise_ft_online(series, *schedule, n);
      fired = n;
    }
    if (fired == 0) {
      throw std::runtime_error("schedule k=" + std::to_string(schedule->k()) + " never fires within epochs 1.." +
                               std::to_string(last));
    }
    if (fired != last) out << "note: epochs after " << fired << " are not covered by the schedule\n";
  } else {
    std::vector<const model::ParamTree<float>*> trees;
    for (auto i : indices) {
      if (i > last) throw std::runtime_error("index " + std::to_string(i) + " beyond theta_" + std::to_string(last));
      trees.push_back(&series.at(i));
    }
    const std::vector<double> w(trees.size(), 1.0 / static_cast<double>(trees.size()));
    result = wiseft::ensemble<float>(trees, w);
    out << "averaged";
    for (auto i : indices) out << " " << i;
    out << "\n";
  }
  const fs::path target(f.out);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  model::save_checkpoint(result, target);
  const auto cfg_src = fs::path(f.dir) / "model.cfg";
  const auto cfg_dst = (target.has_parent_path() ? target.parent_path() : fs::path(".")) / "model.cfg";
  if (fs::exists(cfg_src) && !fs::exists(cfg_dst)) fs::copy_file(cfg_src, cfg_dst);
  out << "wrote " << target.string() << "\n";
  return kExitOk;
}

// --- verify / bench -----------------------------------------------------------------

struct VerifyFlags {
  std::string filter;
  std::string fixtures = DROPCLIP_FIXTURE_DIR;
  std::string bless;
};

int cmd_verify(const VerifyFlags& f, std::ostream& out) {
  if (!f.bless.empty()) {
    verify::write_golden_fixture(f.bless);
    out << "wrote golden fixture to " << f.bless << "\n";
    return kExitOk;
  }
  const verify::VerifyOptions options{f.filter, f.fixtures};
  resolve([&] {
    if (!f.filter.empty() &&
        std::find(verify::groups().begin(), verify::groups().end(), f.filter) == verify::groups().end()) {
      throw UsageError("unknown check group '" + f.filter + "'");
    }
    return 0;
  });
  const auto results = verify::run_verify(options, &out);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
  out << results.size() - static_cast<std::size_t>(failed) << " passed, " << failed << " failed\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

struct BenchFlags {
  std::string ratios = "0,0.7,0.8,0.9";
  std::size_t warmup = 1;
  std::size_t timed = 5;
  std::size_t batch_size = 64;
  std::optional<std::string> manifest;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  const auto ratios = resolve([&] {
    std::vector<double> r;
    for (const auto& s : split_list(f.ratios)) r.push_back(util::parse_double("ratios", s));
    return r;
  });
  model::ModelConfig mc;
  train::TrainConfig tc;
  tc.batch_size = f.batch_size;
  tc.seed = f.seed;
  const auto data = f.manifest ? sd::read_manifest(*f.manifest) : sd::DatasetManifest{};
  const auto rows = eval::bench_drop(mc, tc, data, ratios, {f.warmup, f.timed});

  const auto& full = *std::find_if(rows.begin(), rows.end(), [](const auto& r) { return r.ratio == 0.0; });
  eval::Table t({"drop_ratio", "kept_per_clip", "step_ms", "speedup", "peak_live_scalars", "activation_vs_full"});
  for (const auto& r : rows) {
    t.add_row({eval::fixed(r.ratio, 2), std::to_string(r.kept_tokens), eval::fixed(1e3 * r.mean_step_seconds, 1),
               eval::fixed(full.mean_step_seconds / r.mean_step_seconds, 2), std::to_string(r.peak_live_scalars),
               eval::fixed(static_cast<double>(r.peak_live_scalars) / static_cast<double>(full.peak_live_scalars), 3)});
  }
  out << "train step, batch " << f.batch_size << ", " << f.timed << " timed steps per ratio\n\n" << t.text();
  auto find = [&](double x) {
    return std::find_if(rows.begin(), rows.end(), [x](const auto& r) { return std::abs(r.ratio - x) < 1e-12; });
  };
  if (find(0.7) != rows.end() && find(0.9) != rows.end()) {
    out << "\nactivation ratio 0.7 vs 0.9: "
        << eval::fixed(static_cast<double>(find(0.7)->peak_live_scalars) /
                           static_cast<double>(find(0.9)->peak_live_scalars),
                       2)
        << " (published GPU memory 37.3/16.2 = " << eval::fixed(37.3 / 16.2, 2) << ")\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dropclip: video-language post-pretraining with patch dropping and text masking", "dropclip"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  GenDataFlags gen;
  add_gen_data(*app.add_subcommand("gen-data", "Write train/val/test manifests for a synthetic split"), gen);

  DumpFlags dump;
  auto* dump_cmd = app.add_subcommand("dump", "Write one caption per sample for inspection");
  dump_cmd->add_option("--manifest", dump.manifest, "Manifest to dump")->required();
  dump_cmd->add_option("--out", dump.out, "Output text file")->required();

  TrainFlags pre, post;
  add_train_flags(*app.add_subcommand("pretrain", "Stage-0 image-text pretraining on static clips"), pre,
                  pipeline::Stage::pretrain);
  add_train_flags(*app.add_subcommand("post-pretrain", "Video-language post-pretraining"), post,
                  pipeline::Stage::post_pretrain);

  EvalFlags ev;
  add_eval_flags(*app.add_subcommand("eval", "Evaluate a checkpoint (never drops patches)"), ev);

  WiseFtFlags wf;
  auto* wf_cmd = app.add_subcommand("wiseft", "Ensemble snapshots of a finished run");
  wf_cmd->add_option("dir", wf.dir, "Run directory holding theta_NNN.ckpt")->required();
  wf_cmd->add_option("--schedule", wf.schedule, "Replay online WiSE-FT with k,l");
  wf_cmd->add_option("--indices", wf.indices, "Average exactly these snapshots, e.g. 0,10");
  wf_cmd->add_option("--out", wf.out, "Output checkpoint")->required();

  VerifyFlags vf;
  auto* vf_cmd = app.add_subcommand("verify", "Run the built-in correctness checks");
  vf_cmd->add_option("--filter", vf.filter, "Run one group only");
  vf_cmd->add_option("--fixtures", vf.fixtures, "Directory holding golden.ckpt and golden.hashes")
      ->capture_default_str();
  vf_cmd->add_option("--bless", vf.bless, "Regenerate the golden fixture into this directory and exit");

  BenchFlags bf;
  auto* bf_cmd = app.add_subcommand("bench", "Train-step time and activations per drop ratio");
  bf_cmd->add_option("--ratios", bf.ratios, "Comma-separated drop ratios (must include 0)")->capture_default_str();
  bf_cmd->add_option("--warmup", bf.warmup, "Untimed steps per ratio")->capture_default_str();
  bf_cmd->add_option("--timed", bf.timed, "Timed steps per ratio")->capture_default_str();
  bf_cmd->add_option("--batch-size", bf.batch_size, "Pairs per step")->capture_default_str();
  bf_cmd->add_option("--manifest", bf.manifest, "Motion manifest (default: built-in desk split)");
  bf_cmd->add_option("--seed", bf.seed, "Seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    if (cmd == "gen-data") return cmd_gen_data(gen, out);
    if (cmd == "dump") return cmd_dump(dump, out);
    if (cmd == "pretrain") return cmd_train(pre, pipeline::Stage::pretrain, out);
    if (cmd == "post-pretrain") return cmd_train(post, pipeline::Stage::post_pretrain, out);
    if (cmd == "eval") return cmd_eval(ev, out);
    if (cmd == "wiseft") return cmd_wiseft(wf, out);
    if (cmd == "verify") return cmd_verify(vf, out);
    if (cmd == "bench") return cmd_bench(bf, out);
    err << "error: unknown command " << cmd << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace dropclip::cli
