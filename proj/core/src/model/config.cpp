// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/model/config.hpp"

#include <stdexcept>

namespace dropclip::model {

std::string_view name(Backbone backbone) {
  return backbone == Backbone::temporal ? "temporal" : "frame_avg";
}

Backbone parse_backbone(std::string_view text) {
  if (text == "temporal") return Backbone::temporal;
  if (text == "frame_avg") return Backbone::frame_avg;
  throw std::invalid_argument("unknown backbone '" + std::string(text) +
                              "' (expected temporal or frame_avg)");
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("model config: " + what);
  };
  require(embed_dim > 0 && proj_dim > 0, "dims must be positive");
  require(vision_layers >= 1 && text_layers >= 1, "encoders need at least one layer");
  require(vision_heads > 0 && embed_dim % vision_heads == 0, "embed_dim must be divisible by vision_heads");
  require(text_heads > 0 && embed_dim % text_heads == 0, "embed_dim must be divisible by text_heads");
  if (with_decoder) {
    require(decoder_layers >= 1, "decoder_layers must be at least 1");
    require(decoder_heads > 0 && decoder_dim > 0 && decoder_dim % decoder_heads == 0,
            "decoder_dim must be divisible by decoder_heads");
  }
  require(mlp_ratio >= 1, "mlp_ratio must be at least 1");
  require(patch_size > 0 && height % patch_size == 0 && width % patch_size == 0,
          "height and width must be divisible by patch_size");
  require(frames >= 1 && channels >= 1, "frames and channels must be positive");
  require(vocab_size > 4, "vocab_size must exceed the 4 special tokens");
  require(max_text_len >= 3, "max_text_len must be at least 3");
}

void store(const ModelConfig& c, util::KvDocument& doc, std::string_view prefix) {
  const std::string p(prefix);
  auto put = [&](const char* key, std::size_t v) { doc.set(p + key, std::to_string(v)); };
  put("embed_dim", c.embed_dim);
  put("vision_layers", c.vision_layers);
  put("vision_heads", c.vision_heads);
  put("text_layers", c.text_layers);
  put("text_heads", c.text_heads);
  doc.set(p + "with_decoder", c.with_decoder ? "true" : "false");
  put("decoder_layers", c.decoder_layers);
  put("decoder_dim", c.decoder_dim);
  put("decoder_heads", c.decoder_heads);
  put("mlp_ratio", c.mlp_ratio);
  put("patch_size", c.patch_size);
  put("frames", c.frames);
  put("height", c.height);
  put("width", c.width);
  put("channels", c.channels);
  put("vocab_size", c.vocab_size);
  put("max_text_len", c.max_text_len);
  put("proj_dim", c.proj_dim);
  doc.set(p + "backbone", std::string(name(c.backbone)));
}

ModelConfig load_model_config(const util::KvDocument& doc, std::string_view prefix, ModelConfig c) {
  const std::string p(prefix);
  auto get = [&](const char* key, std::size_t& out) {
    if (const auto* v = doc.find(p + key)) {
      const auto n = util::parse_int(p + key, *v);
      if (n < 0) throw util::FormatError("key '" + p + key + "': must be non-negative");
      out = static_cast<std::size_t>(n);
    }
  };
  get("embed_dim", c.embed_dim);
  get("vision_layers", c.vision_layers);
  get("vision_heads", c.vision_heads);
  get("text_layers", c.text_layers);
  get("text_heads", c.text_heads);
  if (const auto* v = doc.find(p + "with_decoder")) c.with_decoder = util::parse_bool(p + "with_decoder", *v);
  get("decoder_layers", c.decoder_layers);
  get("decoder_dim", c.decoder_dim);
  get("decoder_heads", c.decoder_heads);
  get("mlp_ratio", c.mlp_ratio);
  get("patch_size", c.patch_size);
  get("frames", c.frames);
  get("height", c.height);
  get("width", c.width);
  get("channels", c.channels);
  get("vocab_size", c.vocab_size);
  get("max_text_len", c.max_text_len);
  get("proj_dim", c.proj_dim);
  if (const auto* v = doc.find(p + "backbone")) c.backbone = parse_backbone(*v);
  c.validate();
  return c;
}

void write_model_config(const ModelConfig& config, const std::filesystem::path& path) {
  util::KvDocument doc{std::string(kModelConfigHeader)};
  store(config, doc);
  util::write_text_file(path, doc.to_string());
}

ModelConfig read_model_config(const std::filesystem::path& path) {
  return load_model_config(util::read_kv_file(path, kModelConfigHeader));
}

}  // namespace dropclip::model
