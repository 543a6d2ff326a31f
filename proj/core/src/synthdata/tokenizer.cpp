// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/synthdata/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace dropclip::synthdata {

namespace {

const std::string& special_name(std::int32_t id) {
  static const std::string names[kNumSpecial] = {"<pad>", "<bos>", "<eos>", "<mask>"};
  return names[id];
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

}  // namespace

std::size_t TokenizedText::eos_position() const {
  const auto it = std::find(ids.begin(), ids.end(), kEos);
  if (it == ids.end()) throw std::invalid_argument("token sequence has no EOS");
  return static_cast<std::size_t>(it - ids.begin());
}

std::size_t TokenizedText::length() const {
  return static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [](auto id) { return id != kPad; }));
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) throw std::invalid_argument("vocabulary: empty word");
    if (std::find(words_.begin(), words_.begin() + static_cast<long>(i), words_[i]) !=
        words_.begin() + static_cast<long>(i)) {
      throw std::invalid_argument("vocabulary: duplicate word '" + words_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::standard() {
  return Vocabulary({"a",     "red",    "green", "blue", "yellow", "square", "circle",
                     "triangle", "moving", "not", "left", "right",  "up",     "down",
                     "on",    "the",    "side",  "what", "color",  "is",     "shape",
                     "which", "direction", "it"});
}

Vocabulary Vocabulary::from_listing(std::string_view listing) {
  return Vocabulary(split_words(listing));
}

std::int32_t Vocabulary::id(std::string_view word) const {
  const auto it = std::find(words_.begin(), words_.end(), word);
  if (it == words_.end()) throw OutOfVocabularyError(std::string(word));
  return static_cast<std::int32_t>(kNumSpecial + static_cast<std::size_t>(it - words_.begin()));
}

bool Vocabulary::contains(std::string_view word) const {
  return std::find(words_.begin(), words_.end(), word) != words_.end();
}

const std::string& Vocabulary::word(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
  }
  if (static_cast<std::size_t>(id) < kNumSpecial) return special_name(id);
  return words_[static_cast<std::size_t>(id) - kNumSpecial];
}

std::string Vocabulary::listing() const {
  std::string out;
  for (const auto& w : words_) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

Tokenizer::Tokenizer(Vocabulary vocabulary, std::size_t max_length)
    : vocab_(std::move(vocabulary)), max_length_(max_length) {
  if (max_length_ < 3) throw std::invalid_argument("tokenizer: max length must be at least 3");
}

TokenizedText Tokenizer::tokenize(std::string_view text) const {
  const auto words = split_words(text);
  if (words.size() + 2 > max_length_) {
    throw std::invalid_argument("tokenize: " + std::to_string(words.size()) +
                                " words exceed max length " + std::to_string(max_length_));
  }
  TokenizedText out;
  out.ids.assign(max_length_, kPad);
  out.ids[0] = kBos;
  for (std::size_t i = 0; i < words.size(); ++i) out.ids[i + 1] = vocab_.id(words[i]);
  out.ids[words.size() + 1] = kEos;
  return out;
}

std::string Tokenizer::detokenize(const TokenizedText& tokens) const {
  std::string out;
  for (auto id : tokens.ids) {
    if (id == kBos || id == kPad) continue;
    if (id == kEos) break;
    if (!out.empty()) out.push_back(' ');
    out += vocab_.word(id);
  }
  return out;
}

}  // namespace dropclip::synthdata
