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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coop/common.hpp"

namespace coop::lm {

/// Auto-regressive generator p(x_t | x_{1:t-1}) over a closed token space.
///
/// Distributions are dense vectors indexed by token id, of length
/// vocab_size(). They sum to 1; ids that can never be emitted (BOS, UNK for
/// the n-gram model) carry probability 0. Contexts never contain BOS; the
/// model pads internally.
///
/// Implementations must be safe for concurrent calls to the const members.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual TokenId eos_id() const = 0;

  /// Writes the next-token distribution into `out` (size vocab_size()).
  virtual void next_token_dist(std::span<const TokenId> context, std::span<double> out) const = 0;

  virtual std::string detokenize(std::span<const TokenId> tokens) const = 0;
  virtual TokenSeq tokenize(std::string_view text) const = 0;

  std::vector<double> next_token_dist(std::span<const TokenId> context) const {
    std::vector<double> out(vocab_size());
    next_token_dist(context, out);
    return out;
  }
};

/// Draws one id from `dist` by inverse CDF in id order. With temperature
/// != 1 the distribution is re-weighted as p^(1/T) first.
TokenId sample_from(std::span<const double> dist, Rng& rng, double temperature = 1.0);

/// Appends up to `max_len` sampled tokens to `context`, stopping after EOS
/// (which is kept as the final token).
TokenSeq sample_continuation(const LanguageModel& lm, std::span<const TokenId> context,
                             std::size_t max_len, Rng& rng, double temperature = 1.0);
TokenSeq sample_continuation(const LanguageModel& lm, std::span<const TokenId> context,
                             std::size_t max_len, std::uint64_t rng_seed,
                             double temperature = 1.0);

/// Sum of log p(x_t | x_{<t}) over the tokens followed by a terminal EOS
/// (not appended twice if already present).
double sequence_logprob(const LanguageModel& lm, std::span<const TokenId> tokens);

}  // namespace coop::lm
