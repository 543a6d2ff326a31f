// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/pipeline/run_config.hpp"

#include <set>
#include <stdexcept>

#include "dropclip/util/kv_file.hpp"

namespace dropclip::pipeline {

std::string_view name(Stage stage) {
  return stage == Stage::pretrain ? "pretrain" : "post-pretrain";
}

Stage parse_stage(std::string_view text) {
  if (text == "pretrain") return Stage::pretrain;
  if (text == "post-pretrain") return Stage::post_pretrain;
  throw std::invalid_argument("unknown stage '" + std::string(text) + "'");
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (manifest.empty()) throw std::invalid_argument("run config: manifest is required");
  if (output_dir.empty()) throw std::invalid_argument("run config: output dir is required");
  if (threads == 0) throw std::invalid_argument("run config: threads must be at least 1");
  if (stage == Stage::post_pretrain && init.empty()) {
    throw std::invalid_argument("run config: post-pretraining needs an init checkpoint");
  }
  if (stage == Stage::pretrain) {
    if (model.frames != 1 || model.has_temporal_block() || model.with_decoder) {
      throw std::invalid_argument("run config: stage-0 model must be single-frame frame_avg without decoder");
    }
    if (wise_ft) throw std::invalid_argument("run config: WiSE-FT applies to post-pretraining only");
  }
}

model::ModelConfig stage0_model(model::ModelConfig target) {
  target.frames = 1;
  target.backbone = model::Backbone::frame_avg;
  target.with_decoder = false;
  return target;
}

RunConfig defaults_for(Stage stage) {
  RunConfig c;
  c.stage = stage;
  if (stage == Stage::pretrain) {
    c.model = stage0_model(c.model);
    c.train.steps = 1000;
    // Half of each frame is dropped so the stand-in encoder copes with the
    // sparse inputs it sees after post-pretraining drops 90% of a clip.
    c.train.drop_ratio = 0.5;
    c.train.mask_ratio = 0.0;
    c.train.mask_weight = 0.0;
    c.train.freeze_text = false;
  } else {
    c.wise_ft.emplace(10, 3);
  }
  return c;
}

void apply_paper_preset(RunConfig& config) {
  const auto seed = config.train.seed;
  config.train = train::TrainConfig::paper_preset();
  config.train.seed = seed;
  if (config.stage == Stage::post_pretrain) config.wise_ft.emplace(10, 3);
}

namespace {

util::KvDocument to_doc(const RunConfig& c) {
  util::KvDocument doc{std::string(kRunConfigHeader)};
  doc.set("stage", std::string(name(c.stage)));
  doc.set("manifest", c.manifest.string());
  doc.set("init", c.init.string());
  doc.set("output_dir", c.output_dir.string());
  doc.set("threads", std::to_string(c.threads));
  doc.set("wiseft", c.wise_ft ? std::to_string(c.wise_ft->k()) + "," + std::to_string(c.wise_ft->l()) : "off");
  model::store(c.model, doc, "model.");
  train::store(c.train, doc, "train.");
  return doc;
}

}  // namespace

wiseft::WiseFtSchedule parse_schedule(std::string_view text) {
  const auto comma = text.find(',');
  if (comma == std::string_view::npos) {
    throw std::invalid_argument("WiSE-FT schedule '" + std::string(text) + "' is not of the form k,l");
  }
  long long k = 0, l = 0;
  try {
    k = util::parse_int("k", std::string(text.substr(0, comma)));
    l = util::parse_int("l", std::string(text.substr(comma + 1)));
  } catch (const util::FormatError& e) {
    throw std::invalid_argument("WiSE-FT schedule '" + std::string(text) + "': " + e.what());
  }
  if (k < 0 || l < 0) throw std::invalid_argument("WiSE-FT schedule values must be non-negative");
  return wiseft::WiseFtSchedule(static_cast<std::size_t>(k), static_cast<std::size_t>(l));
}

std::string run_config_to_string(const RunConfig& config) { return to_doc(config).to_string(); }

RunConfig parse_run_config(std::string_view text, const RunConfig& base) {
  const auto doc = util::parse_kv(text, kRunConfigHeader);
  RunConfig c = base;
  if (const auto* v = doc.find("stage")) c.stage = parse_stage(*v);
  if (const auto* v = doc.find("manifest")) c.manifest = *v;
  if (const auto* v = doc.find("init")) c.init = *v;
  if (const auto* v = doc.find("output_dir")) c.output_dir = *v;
  if (const auto* v = doc.find("threads")) {
    const auto n = util::parse_int("threads", *v);
    if (n < 1) throw util::FormatError("key 'threads': must be at least 1");
    c.threads = static_cast<std::size_t>(n);
  }
  if (const auto* v = doc.find("wiseft")) {
    if (*v == "off") {
      c.wise_ft.reset();
    } else {
      c.wise_ft = parse_schedule(*v);
    }
  }
  c.model = model::load_model_config(doc, "model.", c.model);
  c.train = train::load_train_config(doc, "train.", c.train);

  const auto resolved = to_doc(c);
  std::set<std::string> known;
  for (const auto& [key, _] : resolved.entries()) known.insert(key);
  for (const auto& [key, _] : doc.entries()) {
    if (!known.contains(key)) throw util::FormatError("run config: unknown key '" + key + "'");
  }
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path, const RunConfig& base) {
  try {
    return parse_run_config(util::read_text_file(path), base);
  } catch (const util::FormatError& e) {
    throw util::FormatError(path.string() + ": " + e.what());
  }
}

void write_run_config(const RunConfig& config, const std::filesystem::path& path) {
  util::write_text_file(path, run_config_to_string(config));
}

void apply_environment(RunConfig& config, const EnvLookup& lookup) {
  if (const char* v = lookup("DROPCLIP_SEED")) {
    const auto n = util::parse_int("DROPCLIP_SEED", v);
    if (n < 0) throw std::invalid_argument("DROPCLIP_SEED must be non-negative");
    config.train.seed = static_cast<std::uint64_t>(n);
  }
  if (const char* v = lookup("DROPCLIP_THREADS")) {
    const auto n = util::parse_int("DROPCLIP_THREADS", v);
    if (n < 1) throw std::invalid_argument("DROPCLIP_THREADS must be at least 1");
    config.threads = static_cast<std::size_t>(n);
  }
}

}  // namespace dropclip::pipeline
