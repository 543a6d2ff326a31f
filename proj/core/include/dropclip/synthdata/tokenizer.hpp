// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dropclip::synthdata {

inline constexpr std::int32_t kPad = 0;
inline constexpr std::int32_t kBos = 1;
inline constexpr std::int32_t kEos = 2;
inline constexpr std::int32_t kMask = 3;
inline constexpr std::size_t kNumSpecial = 4;

class OutOfVocabularyError : public std::invalid_argument {
 public:
  explicit OutOfVocabularyError(const std::string& word)
      : std::invalid_argument("out-of-vocabulary word '" + word + "'"), word_(word) {}
  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

struct TokenizedText {
  std::vector<std::int32_t> ids;

  std::size_t max_length() const { return ids.size(); }
  /// Index of the first EOS; throws if there is none.
  std::size_t eos_position() const;
  /// Number of non-PAD positions.
  std::size_t length() const;

  bool operator==(const TokenizedText&) const = default;
};

/// Closed word list. Ids 0-3 are the special tokens; words follow in order.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> words);

  /// Every word used by the caption and question templates.
  static Vocabulary standard();
  static Vocabulary from_listing(std::string_view listing);

  std::size_t size() const { return kNumSpecial + words_.size(); }
  std::int32_t id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(std::int32_t id) const;
  const std::vector<std::string>& words() const { return words_; }
  /// Space-separated words (no specials).
  std::string listing() const;

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
};

/// Lowercasing whitespace tokenizer over a closed vocabulary.
class Tokenizer {
 public:
  Tokenizer(Vocabulary vocabulary, std::size_t max_length);

  TokenizedText tokenize(std::string_view text) const;
  std::string detokenize(const TokenizedText& tokens) const;

  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t max_length() const { return max_length_; }

 private:
  Vocabulary vocab_;
  std::size_t max_length_;
};

}  // namespace dropclip::synthdata
