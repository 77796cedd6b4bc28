// Copyright 2026 The coop-explain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coop/common.hpp"

namespace coop::corpus {

/// Lowercases ASCII letters and splits on every maximal run of characters
/// that are not ASCII alphanumerics. Non-ASCII bytes are separators too.
std::vector<std::string> tokenize(std::string_view text);

/// Closed vocabulary. Ids 0..2 are BOS, EOS and UNK; regular tokens follow
/// in order of descending corpus count, ties broken lexicographically.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr TokenId kNumSpecial = 3;

  Vocabulary() = default;
  /// `tokens` are the regular tokens in id order (no specials, no duplicates).
  Vocabulary(std::vector<std::string> tokens, std::int64_t min_count);

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t num_regular() const { return id_to_token_.size() - kNumSpecial; }
  std::int64_t min_count() const { return min_count_; }

  /// kUnk for tokens outside the vocabulary.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  static bool is_special(TokenId id) { return id >= 0 && id < kNumSpecial; }

  /// Regular tokens in id order.
  std::span<const std::string> regular_tokens() const;

  TokenSeq encode(std::string_view text) const;
  TokenSeq encode(std::span<const std::string> tokens) const;
  /// Space-joined regular tokens; specials are skipped.
  std::string decode(std::span<const TokenId> ids) const;

  /// Fingerprint of the id assignment.
  std::uint64_t hash() const;

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId, StringHash, std::equal_to<>> token_to_id_;
  std::int64_t min_count_ = 1;
};

struct Document {
  std::string text;
  std::vector<std::string> tokens;
  std::optional<std::size_t> label;

  static Document from_text(std::string text, std::optional<std::size_t> label = {});
};

/// Documents plus an ordered list of class names. Labeled corpora have a
/// label on every document; `validate_labeled` checks the invariants.
struct LabeledCorpus {
  std::vector<Document> documents;
  std::vector<std::string> class_names;

  bool empty() const { return documents.empty(); }
  bool labeled() const;
  /// Throws unless every label indexes class_names, there are >= 2 classes
  /// and each class has >= 1 document.
  void validate_labeled() const;
  std::vector<std::size_t> class_counts() const;
};

Vocabulary build_vocabulary(const LabeledCorpus& corpus, std::int64_t min_count);
Vocabulary build_vocabulary(std::span<const Document> documents, std::int64_t min_count);

/// Reads JSONL: one {"text": string, "label"?: string} object per line.
/// Blank lines are skipped. class_names is the sorted label set.
LabeledCorpus load_corpus(const std::string& path);
LabeledCorpus parse_corpus(std::string_view jsonl);
void save_corpus(const LabeledCorpus& corpus, const std::string& path);
std::string serialize_corpus(const LabeledCorpus& corpus);

/// Fingerprint over texts, labels and class names.
std::uint64_t corpus_hash(const LabeledCorpus& corpus);

}  // namespace coop::corpus
