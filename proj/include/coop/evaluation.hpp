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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coop/corpus.hpp"
#include "coop/explainer.hpp"
#include "coop/glassbox.hpp"

namespace coop::eval {

/// Per-class token -> weight dictionary from any explainer. Weights are on
/// an arbitrary scale; only their order matters to the rank metrics.
struct ImportanceMap {
  std::vector<std::string> class_names;
  std::vector<std::map<std::string, double>> weights;  // parallel to class_names
  std::string source;

  static ImportanceMap from_explanation(const explainer::Explanation& e);
  static ImportanceMap from_glassbox(const glassbox::GlassBox& gb);
  /// CSV with header `class,token,weight` (an extra `rank` column is ignored).
  static ImportanceMap from_csv(std::string_view csv, std::string source = "external");
  static ImportanceMap load_csv(const std::string& path, std::string source = "external");

  /// Throws Error("invalid_importance") on a non-finite weight.
  void validate() const;
  /// nullptr when the class is unknown.
  const std::map<std::string, double>* find(std::string_view cls) const;
  /// Descending weight, ties lexicographic. Empty for an unknown class.
  glassbox::RankedWords ranked(std::string_view cls) const;
};

/// Ascending ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

struct Correlation {
  double rho = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Spearman rho (Pearson on average ranks) with a two-sided p-value from
/// t = rho * sqrt((n - 2) / (1 - rho^2)) on n - 2 degrees of freedom.
/// A constant input gives rho = 0, p = 1. Needs n >= 3.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// Reference set: glass-box features of `cls` with weight > threshold.
/// Words the explainer does not score count as 0. Throws
/// Error("reference_too_small", "reference set too small") below 3 words.
Correlation spearman_vs_glassbox(const ImportanceMap& expl, const glassbox::GlassBox& gb,
                                 ClassId cls, double threshold = 1.0);

struct PrPoint {
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
};

/// precision = |top-k(expl) & topset| / k, recall = |top-k(expl) & topset| / |topset|.
/// `ks` must be positive and ascending.
std::vector<PrPoint> precision_recall_curve(const ImportanceMap& expl,
                                            const glassbox::GlassBox& gb, ClassId cls,
                                            std::span<const std::size_t> ks,
                                            double threshold = 1.0);

struct FlipCurve {
  /// flip_rate[r]: fraction of texts flipped within <= r replacements.
  std::vector<double> flip_rate;
  /// Per text: replacements needed to flip, or -1 if it never flipped.
  std::vector<std::int64_t> flipped_at;
  std::size_t num_texts = 0;

  double rate_at(std::size_t r) const;
};

/// Replaces the original class's top-k explanation words in each text, one
/// occurrence at a time and in rank order, until the scorer's argmax moves.
/// The replacement is the top explanation word of the class the scorer ranks
/// second on the original text (the next one if it equals the removed word).
/// Replaced positions are never revisited. Uses the first max_texts texts.
FlipCurve insertion_deletion(const glassbox::ClassifierScorer& scorer,
                             const std::vector<std::string>& class_names,
                             std::span<const corpus::Document> texts, const ImportanceMap& expl,
                             std::size_t top_k, std::size_t max_texts);

inline FlipCurve insertion_deletion(const glassbox::GlassBox& gb,
                                    std::span<const corpus::Document> texts,
                                    const ImportanceMap& expl, std::size_t top_k = 250,
                                    std::size_t max_texts = 1000) {
  return insertion_deletion(gb, gb.class_names(), texts, expl, top_k, max_texts);
}

struct EvalOptions {
  double threshold = 1.0;
  std::vector<std::size_t> ks{10, 20, 50, 100, 250, 500, 1000, 1500};
  std::size_t top_k = 250;
  std::size_t max_texts = 1000;
};

struct ClassReport {
  std::string cls;
  Correlation spearman;
  std::size_t reference_size = 0;
  std::vector<PrPoint> pr_curve;
};

struct EvalReport {
  std::vector<ClassReport> classes;
  std::vector<PrPoint> mean_pr_curve;
  FlipCurve flips;
  double mean_rho = 0.0;
  double mean_p = 1.0;
  std::map<std::string, std::string> metadata;
  std::vector<std::string> warnings;

  std::string to_json() const;
  /// `k,precision,recall`, averaged over the evaluated classes.
  std::string pr_csv() const;
  /// `replacements,flip_rate`.
  std::string flip_csv() const;
};

/// Spearman and PR per glass-box class plus the flip curve over `texts`.
/// Classes whose reference set is too small are skipped with a warning.
EvalReport evaluate(const ImportanceMap& expl, const glassbox::GlassBox& gb,
                    std::span<const corpus::Document> texts, const EvalOptions& options = {});

/// Mean Spearman over glass-box classes (classes with a too-small reference
/// set are skipped; throws if none remain).
Correlation mean_spearman(const ImportanceMap& expl, const glassbox::GlassBox& gb,
                          double threshold = 1.0);

struct SweepPoint {
  std::size_t size = 0;
  double mean_rho = 0.0;
  double mean_p = 1.0;
  std::vector<double> per_seed_rho;
};

/// First `size` documents of every class, in corpus order. Throws
/// Error("insufficient_corpus", "insufficient corpus") when a class is short.
corpus::LabeledCorpus truncate_per_class(const corpus::LabeledCorpus& corpus, std::size_t size);

/// Fits an explanation on each truncation of each per-seed corpus and
/// averages rho over classes and seeds. `sizes` must be ascending.
std::vector<SweepPoint> sweep_from_corpora(std::span<const corpus::LabeledCorpus> per_seed,
                                           const glassbox::GlassBox& gb,
                                           std::span<const std::size_t> sizes,
                                           double threshold = 1.0,
                                           const glassbox::LogRegParams& params = {});

/// Generates max(sizes) texts per class once per seed, then sweeps by
/// truncation.
std::vector<SweepPoint> sweep_num_texts(const lm::LanguageModel& lm, const glassbox::GlassBox& gb,
                                        std::span<const std::size_t> sizes,
                                        const explainer::ExplainerConfig& config,
                                        std::span<const std::uint64_t> seeds,
                                        double threshold = 1.0);

std::string sweep_csv(std::span<const SweepPoint> points);

}  // namespace coop::eval
