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

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coop/corpus.hpp"
#include "coop/language_model.hpp"

namespace coop::lm {

/// Add-k smoothed n-gram model with backoff to the longest stored context.
///
/// Counts are collected over sequences padded with order-1 BOS and
/// terminated by EOS, for every context length 0..order-1. The outcome
/// space is the regular tokens plus EOS: BOS and UNK always get
/// probability 0 and UNK targets are not counted.
///
/// Lookup uses the longest suffix of the padded context that was seen in
/// training, down to length 1 (length 0 for unigram models). When no suffix
/// was seen the distribution is uniform over the outcome space.
class NGramLM final : public LanguageModel {
 public:
  struct ContextStats {
    std::int64_t total = 0;
    std::vector<std::pair<TokenId, std::int64_t>> next;  // sorted by id
  };

  NGramLM(corpus::Vocabulary vocabulary, int order, double smoothing_k);

  /// Builds the vocabulary from the corpus (`min_count`) and counts it.
  static NGramLM fit(const corpus::LabeledCorpus& corpus, int order, double smoothing_k,
                     std::int64_t min_count = 1);
  /// Counts the corpus against a given vocabulary.
  static NGramLM fit(const corpus::LabeledCorpus& corpus, corpus::Vocabulary vocabulary,
                     int order, double smoothing_k);

  std::size_t vocab_size() const override { return vocab_.size(); }
  TokenId eos_id() const override { return corpus::Vocabulary::kEos; }
  void next_token_dist(std::span<const TokenId> context, std::span<double> out) const override;
  using LanguageModel::next_token_dist;
  std::string detokenize(std::span<const TokenId> tokens) const override;
  TokenSeq tokenize(std::string_view text) const override;

  int order() const { return order_; }
  double smoothing_k() const { return k_; }
  const corpus::Vocabulary& vocabulary() const { return vocab_; }
  /// Size of the outcome space (regular tokens + EOS).
  std::size_t num_outcomes() const { return vocab_.num_regular() + 1; }
  std::size_t num_contexts() const { return contexts_.size(); }
  /// nullptr if the exact context (already padded, no truncation) is not stored.
  const ContextStats* find_context(std::span<const TokenId> context) const;

  std::string to_json() const;
  static NGramLM from_json(std::string_view json);
  void save(const std::string& path) const;
  static NGramLM load(const std::string& path);

 private:
  struct SeqLess {
    using is_transparent = void;
    template <class A, class B>
    bool operator()(const A& a, const B& b) const {
      return std::lexicographical_compare(std::begin(a), std::end(a), std::begin(b), std::end(b));
    }
  };

  void add_sequence(std::span<const TokenId> tokens);

  corpus::Vocabulary vocab_;
  int order_;
  double k_;
  std::map<TokenSeq, ContextStats, SeqLess> contexts_;
};

}  // namespace coop::lm
