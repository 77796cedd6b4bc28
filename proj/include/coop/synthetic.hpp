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
#include <string>
#include <vector>

#include "coop/corpus.hpp"

namespace coop::synthetic {

/// Planted-keyword corpus. Every class owns `keywords_per_class` exclusive
/// keywords and a handful of tilted background words, both drawn with
/// graded frequencies; the rest of each text is Zipfian background.
struct PlantedConfig {
  int num_classes = 4;
  int num_docs = 5000;
  int keywords_per_class = 5;
  int background_vocab = 150;
  int tilted_per_class = 10;
  /// Per-slot probability of a keyword.
  double keyword_rate = 0.25;
  /// Per-slot probability of one of the class's tilted background words.
  double tilt_rate = 0.2;
  /// Probability that a keyword slot draws another class's keyword.
  double overlap = 0.0;
  int min_length = 6;
  int max_length = 14;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

std::string class_name(int cls);
std::string keyword(int cls, int index);
std::string background_word(int index);

/// keywords[c][j], most frequent first.
std::vector<std::vector<std::string>> planted_keywords(const PlantedConfig& config);

/// Documents are assigned to classes round-robin.
corpus::LabeledCorpus make_planted_corpus(const PlantedConfig& config);

/// `n` texts made of untilted background words plus exactly one keyword
/// (class i % num_classes, keyword chosen uniformly), labeled by that class.
corpus::LabeledCorpus make_single_keyword_texts(const PlantedConfig& config, int n,
                                                std::uint64_t seed);

}  // namespace coop::synthetic
