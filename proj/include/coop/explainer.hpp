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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "coop/corpus.hpp"
#include "coop/glassbox.hpp"
#include "coop/language_model.hpp"
#include "coop/mcts.hpp"

namespace coop::explainer {

enum class Mode { therapy, baseline };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);

struct ExplainerConfig {
  int texts_per_class = 200;
  mcts::MctsConfig mcts;
  Mode mode = Mode::therapy;
  std::uint64_t seed = 0;
  int workers = 1;
  /// Stamped on every generated sample and on the explanation.
  std::string config_hash;
  /// Regression used to distill the explanation.
  glassbox::LogRegParams regression;

  void validate() const;
};

/// One generated text with its provenance. Serialized as a JSONL line
/// {"text", "class", "final_score", "seed", "config_hash"}.
struct GeneratedSample {
  std::string text;
  std::string cls;
  double final_score = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

std::string samples_to_jsonl(const std::vector<GeneratedSample>& samples);
std::vector<GeneratedSample> samples_from_jsonl(std::string_view jsonl);

struct GeneratedCorpus {
  corpus::LabeledCorpus corpus;
  std::vector<GeneratedSample> samples;  // parallel to corpus.documents
  std::vector<std::string> warnings;
};

/// Rebuilds the labeled corpus view of saved samples (labels by class name).
GeneratedCorpus corpus_from_samples(std::vector<GeneratedSample> samples,
                                    const std::vector<std::string>& class_names);

/// `n` guided generations for `cls`, labeled with the guidance class. Text i
/// uses the seed derive_seed(config.seed, cls + 1, i).
GeneratedCorpus generate_class_corpus(const lm::LanguageModel& lm,
                                      const glassbox::ClassifierScorer& scorer,
                                      const std::vector<std::string>& class_names, ClassId cls,
                                      int n, const ExplainerConfig& config);

/// `n_total` unguided LM samples, each labeled by the scorer's argmax
/// (ties to the lowest class id). Absent classes are reported in warnings.
GeneratedCorpus generate_baseline_corpus(const lm::LanguageModel& lm,
                                         const glassbox::ClassifierScorer& scorer,
                                         const std::vector<std::string>& class_names,
                                         int n_total, const ExplainerConfig& config);

/// Per-class ranked word importances plus provenance.
struct Explanation {
  std::vector<std::string> class_names;
  std::vector<glassbox::RankedWords> ranked;  // per class, descending weight
  std::map<std::string, std::string> metadata;
  std::vector<std::size_t> class_counts;
  std::vector<std::string> warnings;

  /// CSV `class,token,weight,rank` (rank is 1-based).
  std::string to_csv() const;
  std::string to_json() const;
  static Explanation from_json(std::string_view json);
};

/// tf-idf over the whole generated corpus, multinomial logistic regression
/// on it, weights returned per class. Independent of document order.
/// Classes without documents get an empty ranking.
Explanation fit_explanation(const corpus::LabeledCorpus& generated,
                            const glassbox::LogRegParams& params = {});

struct ExplainResult {
  Explanation explanation;
  GeneratedCorpus generated;
};

/// Therapy mode: one guided corpus per class, then fit_explanation.
/// Baseline mode: unguided corpus of texts_per_class * classes texts.
ExplainResult explain(const lm::LanguageModel& lm, const glassbox::ClassifierScorer& scorer,
                      const std::vector<std::string>& class_names, const ExplainerConfig& config);

/// Runs fn(0..n-1) on `workers` threads (inline when workers <= 1).
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace coop::explainer
