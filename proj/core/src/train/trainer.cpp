// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "dropclip/model/checkpoint.hpp"
#include "dropclip/util/dir_lock.hpp"

namespace dropclip::train {

namespace nx = numerics;

namespace {

std::string describe(std::size_t step, const LossBreakdown& l) {
  return "non-finite loss at step " + std::to_string(step) + ": l_con=" + util::format_double(l.contrastive) +
         " l_mask=" + util::format_double(l.masked) + " total=" + util::format_double(l.total);
}

void check_compatible(const TrainingJob& job) {
  job.model.validate();
  job.train.validate();
  job.data.validate();
  const auto& m = job.model;
  const auto& d = job.data;
  if (d.vocabulary.size() != m.vocab_size) {
    throw std::invalid_argument("manifest vocabulary has " + std::to_string(d.vocabulary.size()) +
                                " ids but the model expects " + std::to_string(m.vocab_size));
  }
  if (d.frames != m.frames || d.height != m.height || d.width != m.width) {
    throw std::invalid_argument("manifest clips are " + std::to_string(d.frames) + "x" +
                                std::to_string(d.height) + "x" + std::to_string(d.width) +
                                " but the model expects " + std::to_string(m.frames) + "x" +
                                std::to_string(m.height) + "x" + std::to_string(m.width));
  }
  if (d.count < job.train.batch_size) {
    throw std::invalid_argument("manifest holds " + std::to_string(d.count) +
                                " samples, fewer than one batch of " + std::to_string(job.train.batch_size));
  }
}

TrainingResult train_epochs(const TrainingJob& job, model::ParamTree<float> params, AdamW optimizer,
                            TrainingResult result, std::size_t first_epoch, std::ostream* log) {
  const auto& cfg = job.train;
  const masking::RngStreams streams(cfg.seed);
  const synthdata::Tokenizer tokenizer(job.data.vocabulary, job.model.max_text_len);
  const auto spe = steps_per_epoch(job.data.count, cfg.batch_size);
  const auto epochs = (cfg.steps + spe - 1) / spe;

  const auto metrics_path = job.output_dir / "metrics.log";
  std::string kept;
  if (first_epoch > 0) {
    // Drop lines past the resume point so the log matches an uninterrupted run.
    std::ifstream in(metrics_path);
    std::string line;
    for (std::size_t i = 0; i < first_epoch * spe && std::getline(in, line); ++i) kept += line + '\n';
  }
  std::ofstream metrics(metrics_path, std::ios::trunc);
  metrics << kept;
  if (!metrics) throw std::runtime_error("cannot open " + (job.output_dir / "metrics.log").string());

  std::vector<Example> batch(cfg.batch_size);
  for (std::size_t epoch = first_epoch; epoch < epochs; ++epoch) {
    const auto order = epoch_order(streams, job.data.count, epoch);
    const auto begin = epoch * spe;
    const auto end = std::min(cfg.steps, begin + spe);
    for (std::size_t step = begin; step < end; ++step) {
      const auto offset = (step - begin) * cfg.batch_size;
      for (std::size_t i = 0; i < cfg.batch_size; ++i) {
        batch[i] = make_example(job.data, tokenizer, order[offset + i]);
      }
      const auto r = train_step(params, optimizer, job.model, cfg, batch, streams, step);
      result.losses.push_back(r.losses);
      const std::string line = "step=" + std::to_string(step) + " lr=" + util::format_double(r.lr) +
                               " l_con=" + util::format_double(r.losses.contrastive) +
                               " l_mask=" + util::format_double(r.losses.masked) + "\n";
      metrics << line;
      if (log != nullptr) *log << line << std::flush;
    }
    metrics.flush();

    const auto n = epoch + 1;
    result.series.push(params.clone());
    if (job.wise_ft && job.wise_ft->fires_at(n)) {
      auto merged = wiseft::wise_ft_online(result.series, *job.wise_ft, n);
      for (const auto& [name, e] : params.entries()) merged.set_trainable(name, e.trainable);
      params = std::move(merged);
      result.ensembled_epochs.push_back(n);
    }
    model::save_checkpoint(result.series.at(n), snapshot_path(job.output_dir, n));
    model::save_checkpoint(optimizer.state(), optimizer_path(job.output_dir, n));
    if (!metrics) throw std::runtime_error("write failure on " + (job.output_dir / "metrics.log").string());
  }
  return result;
}

}  // namespace

NonFiniteLossError::NonFiniteLossError(std::size_t step, const LossBreakdown& losses)
    : std::runtime_error(describe(step, losses)), losses_(losses) {}

void apply_freeze(model::ParamTree<float>& params, const TrainConfig& config) {
  params.set_trainable_prefix("text.", !config.freeze_text);
}

Example make_example(const synthdata::DatasetManifest& manifest, const synthdata::Tokenizer& tokenizer,
                     std::size_t index) {
  auto s = synthdata::gen_sample(manifest, index);
  return Example{std::move(s.clip), tokenizer.tokenize(s.caption)};
}

StepResult train_step(model::ParamTree<float>& params, AdamW& optimizer,
                      const model::ModelConfig& model_config, const TrainConfig& config,
                      std::span<const Example> batch, const masking::RngStreams& streams,
                      std::size_t step) {
  const bool mask_path = model_config.with_decoder && config.mask_weight > 0.0;
  const auto prepared = prepare_batch<float>(batch, model_config, config.drop_ratio,
                                             mask_path ? config.mask_ratio : 0.0, streams, step);
  StepResult r;
  for (const auto& v : prepared.videos) r.kept_tokens += v.indices.size();

  params.prepare_grads();
  nx::Tape<float> tape;
  {
    nx::TapeScope<float> scope(tape);
    const auto loss = joint_loss(params, model_config, prepared, mask_path ? config.mask_weight : 0.0);
    r.losses = {loss.contrastive.item(), loss.masked.item(), loss.total.item()};
    if (!std::isfinite(r.losses.total) || !std::isfinite(r.losses.contrastive) ||
        !std::isfinite(r.losses.masked)) {
      throw NonFiniteLossError(step, r.losses);
    }
    tape.backward(loss.total);
  }
  r.peak_live_scalars = tape.peak_live_scalars();
  tape.clear();

  r.lr = lr_at(step, config);
  optimizer.step(params, r.lr);
  params.zero_grads();
  for (auto& [_, e] : params.entries()) e.value.set_requires_grad(false);
  auto& ls = params.at("logit_scale").mutable_data()[0];
  ls = std::clamp(ls, static_cast<float>(-kMaxLogitScale), static_cast<float>(kMaxLogitScale));
  return r;
}

std::size_t steps_per_epoch(std::size_t count, std::size_t batch_size) {
  if (batch_size == 0 || count < batch_size) {
    throw std::invalid_argument("steps_per_epoch: " + std::to_string(count) + " samples cannot fill a batch of " +
                                std::to_string(batch_size));
  }
  return count / batch_size;
}

std::vector<std::size_t> epoch_order(const masking::RngStreams& streams, std::size_t count,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = streams.stream(masking::RngStreams::kDataOrder, epoch);
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::filesystem::path snapshot_path(const std::filesystem::path& dir, std::size_t epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "theta_%03zu.ckpt", epoch);
  return dir / name;
}

std::filesystem::path optimizer_path(const std::filesystem::path& dir, std::size_t epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "opt_%03zu.ckpt", epoch);
  return dir / name;
}

TrainingResult run_training(const TrainingJob& job, const model::ParamTree<float>& init, std::ostream* log) {
  check_compatible(job);
  auto params = init.clone();
  model::validate_against(params, job.model);
  apply_freeze(params, job.train);
  util::DirLock lock(job.output_dir);
  model::write_model_config(job.model, job.output_dir / "model.cfg");

  TrainingResult result;
  result.series.push(params.clone());
  model::save_checkpoint(params, snapshot_path(job.output_dir, 0));
  return train_epochs(job, std::move(params), AdamW(job.train), std::move(result), 0, log);
}

TrainingResult resume_training(const TrainingJob& job, std::size_t epoch, std::ostream* log) {
  check_compatible(job);
  util::DirLock lock(job.output_dir);
  TrainingResult result;
  for (std::size_t n = 0; n <= epoch; ++n) {
    result.series.push(model::load_checkpoint(snapshot_path(job.output_dir, n), job.model));
  }
  auto params = result.series.at(epoch).clone();
  apply_freeze(params, job.train);
  AdamW optimizer(job.train);
  optimizer.load_state(model::load_checkpoint(optimizer_path(job.output_dir, epoch)));
  return train_epochs(job, std::move(params), std::move(optimizer), std::move(result), epoch, log);
}

}  // namespace dropclip::train
