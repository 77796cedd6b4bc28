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

#include "coop/language_model.hpp"

#include <cmath>

namespace coop::lm {

TokenId sample_from(std::span<const double> dist, Rng& rng, double temperature) {
  if (dist.empty()) throw Error("invalid_argument", "cannot sample from an empty distribution");
  const double u = uniform01(rng);
  std::size_t last_nonzero = 0;

  if (temperature == 1.0) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (dist[i] <= 0.0) continue;
      last_nonzero = i;
      acc += dist[i];
      if (u < acc) return static_cast<TokenId>(i);
    }
    return static_cast<TokenId>(last_nonzero);
  }

  if (!(temperature > 0.0)) throw Error("invalid_argument", "temperature must be > 0");
  const double inv_t = 1.0 / temperature;
  std::vector<double> w(dist.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > 0.0) {
      w[i] = std::pow(dist[i], inv_t);
      total += w[i];
    }
  }
  const double target = u * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    last_nonzero = i;
    acc += w[i];
    if (target < acc) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_nonzero);
}

TokenSeq sample_continuation(const LanguageModel& lm, std::span<const TokenId> context,
                             std::size_t max_len, Rng& rng, double temperature) {
  TokenSeq out(context.begin(), context.end());
  std::vector<double> dist(lm.vocab_size());
  for (std::size_t step = 0; step < max_len; ++step) {
    lm.next_token_dist(out, dist);
    const TokenId next = sample_from(dist, rng, temperature);
    out.push_back(next);
    if (next == lm.eos_id()) break;
  }
  return out;
}

TokenSeq sample_continuation(const LanguageModel& lm, std::span<const TokenId> context,
                             std::size_t max_len, std::uint64_t rng_seed, double temperature) {
  Rng rng(rng_seed);
  return sample_continuation(lm, context, max_len, rng, temperature);
}

double sequence_logprob(const LanguageModel& lm, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw Error("invalid_argument", "sequence_logprob needs a non-empty sequence");
  TokenSeq seq(tokens.begin(), tokens.end());
  if (seq.back() != lm.eos_id()) seq.push_back(lm.eos_id());
  std::vector<double> dist(lm.vocab_size());
  double total = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    lm.next_token_dist(std::span<const TokenId>(seq.data(), t), dist);
    const auto id = seq[t];
    if (id < 0 || static_cast<std::size_t>(id) >= dist.size() || dist[id] <= 0.0) {
      throw Error("invalid_token",
                  "token id " + std::to_string(id) + " has zero probability under the model");
    }
    total += std::log(dist[id]);
  }
  return total;
}

}  // namespace coop::lm
