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

// Small in-memory language models and scorers for search tests.
#pragma once

#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "coop/glassbox.hpp"
#include "coop/language_model.hpp"

namespace toy {

using coop::TokenId;
using coop::TokenSeq;
using DistFn = std::function<std::vector<double>(std::span<const TokenId>)>;

/// Tokens are `names`; the last name is EOS.
class ToyLM final : public coop::lm::LanguageModel {
 public:
  ToyLM(std::vector<std::string> names, DistFn dist) : names_(std::move(names)), dist_(std::move(dist)) {}

  std::size_t vocab_size() const override { return names_.size(); }
  TokenId eos_id() const override { return static_cast<TokenId>(names_.size() - 1); }

  void next_token_dist(std::span<const TokenId> context, std::span<double> out) const override {
    auto d = dist_(context);
    const double s = std::accumulate(d.begin(), d.end(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = d[i] / s;
  }

  using coop::lm::LanguageModel::next_token_dist;

  std::string detokenize(std::span<const TokenId> tokens) const override {
    std::string s;
    for (TokenId t : tokens) {
      if (!s.empty()) s += ' ';
      s += names_[static_cast<std::size_t>(t)];
    }
    return s;
  }

  TokenSeq tokenize(std::string_view text) const override {
    std::istringstream is{std::string(text)};
    TokenSeq out;
    std::string w;
    while (is >> w) {
      for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == w) out.push_back(static_cast<TokenId>(i));
      }
    }
    return out;
  }

  const std::string& name(TokenId t) const { return names_[static_cast<std::size_t>(t)]; }

 private:
  std::vector<std::string> names_;
  DistFn dist_;
};

/// Two classes: class 0 gets fn(text), class 1 the complement.
class FnScorer final : public coop::glassbox::ClassifierScorer {
 public:
  explicit FnScorer(std::function<double(std::string_view)> fn) : fn_(std::move(fn)) {}
  std::size_t num_classes() const override { return 2; }
  std::vector<double> score(std::string_view text) const override {
    const double v = fn_(text);
    return {v, 1.0 - v};
  }

 private:
  std::function<double(std::string_view)> fn_;
};

/// Every sequence of non-EOS tokens with length <= max_len and nonzero
/// probability of being produced (EOS-terminated below the cap, or capped).
inline std::vector<TokenSeq> enumerate_sequences(const coop::lm::LanguageModel& lm, std::size_t max_len) {
  std::vector<TokenSeq> out;
  std::function<void(TokenSeq&)> rec = [&](TokenSeq& seq) {
    const auto d = lm.next_token_dist(seq);
    if (seq.size() == max_len) {
      out.push_back(seq);
      return;
    }
    if (d[static_cast<std::size_t>(lm.eos_id())] > 0.0) out.push_back(seq);
    for (std::size_t t = 0; t < d.size(); ++t) {
      if (static_cast<TokenId>(t) == lm.eos_id() || d[t] <= 0.0) continue;
      seq.push_back(static_cast<TokenId>(t));
      rec(seq);
      seq.pop_back();
    }
  };
  TokenSeq seq;
  rec(seq);
  return out;
}

}  // namespace toy
