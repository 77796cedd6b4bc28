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
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coop/corpus.hpp"

namespace coop::glassbox {

/// Sparse feature vector; indices strictly increasing.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
  double norm() const;
};

/// Smoothed-idf tf-idf over unigram features:
///   idf[f] = ln((1 + N) / (1 + df[f])) + 1,  tf = raw count (or 1 + ln count
///   when sublinear), rows l2-normalized. Tokens outside the feature set are
///   dropped.
class TfIdfVectorizer {
 public:
  TfIdfVectorizer() = default;
  TfIdfVectorizer(std::vector<std::string> features, std::vector<double> idf,
                  bool sublinear_tf = false);

  /// Features are the corpus vocabulary (count >= min_count) in vocabulary id order.
  static TfIdfVectorizer fit(std::span<const corpus::Document> documents,
                             std::int64_t min_count = 1, bool sublinear_tf = false);
  static TfIdfVectorizer fit(const corpus::LabeledCorpus& corpus, std::int64_t min_count = 1,
                             bool sublinear_tf = false);

  SparseVector transform(std::span<const std::string> tokens) const;
  SparseVector transform(const corpus::Document& doc) const { return transform(doc.tokens); }

  std::size_t num_features() const { return features_.size(); }
  const std::vector<std::string>& features() const { return features_; }
  const std::vector<double>& idf() const { return idf_; }
  bool sublinear_tf() const { return sublinear_tf_; }
  /// -1 when the token is not a feature.
  std::int64_t feature_index(std::string_view token) const;
  std::uint64_t vocabulary_hash() const;

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> features_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> index_;
  bool sublinear_tf_ = false;
};

struct LogRegParams {
  double l2_lambda = 1e-3;
  int max_iters = 2000;
  double lr = 0.5;
  double tol = 1e-6;
};

/// Multinomial logistic regression. W is row-major classes x features.
struct LogRegModel {
  std::size_t num_classes = 0;
  std::size_t num_features = 0;
  std::vector<double> W;
  std::vector<double> b;
  LogRegParams params;
  int trained_iterations = 0;

  double weight(ClassId c, std::size_t f) const { return W[c * num_features + f]; }
  std::span<const double> row(ClassId c) const {
    return std::span<const double>(W).subspan(c * num_features, num_features);
  }
  std::vector<double> predict_proba(const SparseVector& x) const;
};

/// Mean cross-entropy plus (l2_lambda / 2) * ||W||^2; the bias is not penalized.
double logreg_loss(const LogRegModel& model, std::span<const SparseVector> X,
                   std::span<const std::size_t> y, double l2_lambda);
/// Gradient of logreg_loss with respect to W (grad_w) and b (grad_b).
void logreg_gradient(const LogRegModel& model, std::span<const SparseVector> X,
                     std::span<const std::size_t> y, double l2_lambda, std::span<double> grad_w,
                     std::span<double> grad_b);

/// Full-batch gradient descent from W = 0, b = 0. Stops after max_iters
/// updates or once the gradient infinity-norm drops below tol. Throws
/// Error("degenerate_corpus") unless at least 2 classes are represented.
LogRegModel fit_logreg(std::span<const SparseVector> X, std::span<const std::size_t> y,
                       std::size_t num_classes, std::size_t num_features,
                       const LogRegParams& params = {});

/// D(c | x): class-membership probabilities for a text.
class ClassifierScorer {
 public:
  virtual ~ClassifierScorer() = default;
  virtual std::size_t num_classes() const = 0;
  /// Probability simplex point of length num_classes().
  virtual std::vector<double> score(std::string_view text) const = 0;
};

/// Index of the largest entry; ties resolve to the lowest class id.
ClassId argmax(std::span<const double> probs);

using RankedWords = std::vector<std::pair<std::string, double>>;

/// Sorts by descending weight, ties broken lexicographically.
void sort_ranked(RankedWords& words);

/// tf-idf + logistic regression classifier whose weights double as
/// ground-truth word importances.
class GlassBox final : public ClassifierScorer {
 public:
  GlassBox() = default;
  GlassBox(std::vector<std::string> class_names, TfIdfVectorizer vectorizer, LogRegModel model);

  static GlassBox train(const corpus::LabeledCorpus& corpus, const LogRegParams& params = {},
                        std::int64_t min_count = 1);

  std::size_t num_classes() const override { return class_names_.size(); }
  std::vector<double> score(std::string_view text) const override;
  std::vector<double> score_tokens(std::span<const std::string> tokens) const;

  const std::vector<std::string>& class_names() const { return class_names_; }
  /// -1 when absent.
  std::int64_t class_index(std::string_view name) const;
  const TfIdfVectorizer& vectorizer() const { return vectorizer_; }
  const LogRegModel& model() const { return model_; }

  /// Features with weight > threshold for `cls`, sorted by descending weight.
  RankedWords top_words(ClassId cls, double threshold = 1.0) const;
  /// Every feature of `cls` ranked.
  RankedWords ranked_words(ClassId cls) const {
    return top_words(cls, -std::numeric_limits<double>::infinity());
  }

  double accuracy(const corpus::LabeledCorpus& corpus) const;

  /// Free-form provenance (corpus hash, config hash) persisted with the model.
  std::map<std::string, std::string> metadata;

  std::string to_json() const;
  static GlassBox from_json(std::string_view json);
  void save(const std::string& path) const;
  static GlassBox load(const std::string& path);

  /// CSV `class,token,weight` for every class and feature.
  std::string importance_csv() const;

 private:
  std::vector<std::string> class_names_;
  TfIdfVectorizer vectorizer_;
  LogRegModel model_;
};

}  // namespace coop::glassbox
