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

#include "coop/ngram_lm.hpp"

#include <fstream>
#include <sstream>

#include "coop/simd/kernels.hpp"
#include "json.hpp"

namespace coop::lm {

using corpus::Vocabulary;

NGramLM::NGramLM(Vocabulary vocabulary, int order, double smoothing_k)
    : vocab_(std::move(vocabulary)), order_(order), k_(smoothing_k) {
  if (order_ < 1) throw Error("invalid_argument", "n-gram order must be >= 1");
  if (!(k_ > 0.0)) throw Error("invalid_argument", "smoothing_k must be > 0");
}

NGramLM NGramLM::fit(const corpus::LabeledCorpus& corpus, int order, double smoothing_k,
                     std::int64_t min_count) {
  if (corpus.empty()) throw Error("empty_corpus", "empty corpus");
  return fit(corpus, corpus::build_vocabulary(corpus, min_count), order, smoothing_k);
}

NGramLM NGramLM::fit(const corpus::LabeledCorpus& corpus, Vocabulary vocabulary, int order,
                     double smoothing_k) {
  if (corpus.empty()) throw Error("empty_corpus", "empty corpus");
  NGramLM lm(std::move(vocabulary), order, smoothing_k);
  for (const auto& doc : corpus.documents) lm.add_sequence(lm.vocab_.encode(doc.tokens));
  for (auto& [ctx, stats] : lm.contexts_) {
    std::sort(stats.next.begin(), stats.next.end());
  }
  return lm;
}

void NGramLM::add_sequence(std::span<const TokenId> tokens) {
  const auto pad = static_cast<std::size_t>(order_ - 1);
  TokenSeq seq(pad, Vocabulary::kBos);
  seq.insert(seq.end(), tokens.begin(), tokens.end());
  seq.push_back(Vocabulary::kEos);

  for (std::size_t t = pad; t < seq.size(); ++t) {
    const TokenId target = seq[t];
    if (target == Vocabulary::kUnk) continue;
    for (std::size_t len = 0; len <= pad; ++len) {
      TokenSeq ctx(seq.begin() + static_cast<std::ptrdiff_t>(t - len),
                   seq.begin() + static_cast<std::ptrdiff_t>(t));
      auto& stats = contexts_[ctx];
      ++stats.total;
      auto it = std::find_if(stats.next.begin(), stats.next.end(),
                             [&](const auto& p) { return p.first == target; });
      if (it == stats.next.end()) {
        stats.next.emplace_back(target, 1);
      } else {
        ++it->second;
      }
    }
  }
}

const NGramLM::ContextStats* NGramLM::find_context(std::span<const TokenId> context) const {
  auto it = contexts_.find(context);
  return it == contexts_.end() ? nullptr : &it->second;
}

void NGramLM::next_token_dist(std::span<const TokenId> context, std::span<double> out) const {
  if (out.size() != vocab_.size()) {
    throw Error("invalid_argument", "distribution buffer has the wrong size");
  }
  for (TokenId id : context) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
      throw Error("invalid_token", "context token id " + std::to_string(id) + " out of range");
    }
  }

  const auto hist = static_cast<std::size_t>(order_ - 1);
  // Last `hist` tokens of the BOS-padded context.
  TokenSeq padded;
  padded.reserve(hist);
  const std::size_t take = std::min(hist, context.size());
  padded.assign(hist - take, Vocabulary::kBos);
  padded.insert(padded.end(), context.end() - static_cast<std::ptrdiff_t>(take), context.end());

  const auto outcomes = static_cast<double>(num_outcomes());
  const std::size_t min_len = hist == 0 ? 0 : 1;
  const ContextStats* stats = nullptr;
  for (std::size_t len = hist + 1; len-- > min_len;) {
    stats = find_context(std::span<const TokenId>(padded).last(len));
    if (stats != nullptr) break;
  }

  if (stats == nullptr) {
    simd::fill(out, 1.0 / outcomes);
  } else {
    const double inv = 1.0 / (static_cast<double>(stats->total) + k_ * outcomes);
    simd::fill(out, k_ * inv);
    for (const auto& [id, count] : stats->next) {
      out[static_cast<std::size_t>(id)] = (static_cast<double>(count) + k_) * inv;
    }
  }
  out[Vocabulary::kBos] = 0.0;
  out[Vocabulary::kUnk] = 0.0;
}

std::string NGramLM::detokenize(std::span<const TokenId> tokens) const {
  return vocab_.decode(tokens);
}

TokenSeq NGramLM::tokenize(std::string_view text) const { return vocab_.encode(text); }

std::string NGramLM::to_json() const {
  nlohmann::json j;
  j["format"] = "coop-ngram-lm";
  j["version"] = 1;
  j["order"] = order_;
  j["smoothing_k"] = k_;
  j["min_count"] = vocab_.min_count();
  j["vocabulary_hash"] = hex64(vocab_.hash());
  auto& toks = j["vocabulary"] = nlohmann::json::array();
  for (const auto& t : vocab_.regular_tokens()) toks.push_back(t);
  auto& ctxs = j["contexts"] = nlohmann::json::array();
  for (const auto& [ctx, stats] : contexts_) {
    nlohmann::json next = nlohmann::json::array();
    for (const auto& [id, count] : stats.next) next.push_back({id, count});
    ctxs.push_back({{"context", ctx}, {"next", std::move(next)}});
  }
  return j.dump();
}

NGramLM NGramLM::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_model", std::string("language model JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "coop-ngram-lm") {
      throw Error("malformed_model", "not an n-gram language model file");
    }
    Vocabulary vocab(j.at("vocabulary").get<std::vector<std::string>>(),
                     j.at("min_count").get<std::int64_t>());
    NGramLM lm(std::move(vocab), j.at("order").get<int>(), j.at("smoothing_k").get<double>());
    for (const auto& c : j.at("contexts")) {
      ContextStats stats;
      for (const auto& p : c.at("next")) {
        const auto id = p.at(0).get<TokenId>();
        const auto count = p.at(1).get<std::int64_t>();
        if (id < 0 || static_cast<std::size_t>(id) >= lm.vocab_.size() || count <= 0) {
          throw Error("malformed_model", "bad next-token entry in language model");
        }
        stats.next.emplace_back(id, count);
        stats.total += count;
      }
      std::sort(stats.next.begin(), stats.next.end());
      lm.contexts_.emplace(c.at("context").get<TokenSeq>(), std::move(stats));
    }
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_model", std::string("language model JSON: ") + e.what());
  }
}

void NGramLM::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write '" + path + "'");
  out << to_json() << '\n';
}

NGramLM NGramLM::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("file_not_found", "cannot open language model '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace coop::lm
