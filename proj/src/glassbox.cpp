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

#include "coop/glassbox.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "coop/simd/kernels.hpp"
#include "json.hpp"

namespace coop::glassbox {

double SparseVector::norm() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// tf-idf

TfIdfVectorizer::TfIdfVectorizer(std::vector<std::string> features, std::vector<double> idf,
                                 bool sublinear_tf)
    : features_(std::move(features)), idf_(std::move(idf)), sublinear_tf_(sublinear_tf) {
  if (features_.size() != idf_.size()) {
    throw Error("invalid_argument", "feature and idf arrays differ in length");
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (!(idf_[i] > 0.0)) throw Error("invalid_argument", "idf values must be > 0");
    if (!index_.emplace(features_[i], static_cast<std::uint32_t>(i)).second) {
      throw Error("invalid_argument", "duplicate feature '" + features_[i] + "'");
    }
  }
}

TfIdfVectorizer TfIdfVectorizer::fit(std::span<const corpus::Document> documents,
                                     std::int64_t min_count, bool sublinear_tf) {
  if (documents.empty()) throw Error("empty_corpus", "empty corpus");
  const auto vocab = corpus::build_vocabulary(documents, min_count);
  std::vector<std::string> features(vocab.regular_tokens().begin(), vocab.regular_tokens().end());

  std::vector<std::int64_t> df(features.size(), 0);
  std::vector<std::int64_t> last_doc(features.size(), -1);
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (const auto& tok : documents[d].tokens) {
      const TokenId id = vocab.id(tok);
      if (corpus::Vocabulary::is_special(id)) continue;
      const auto f = static_cast<std::size_t>(id - corpus::Vocabulary::kNumSpecial);
      if (last_doc[f] != static_cast<std::int64_t>(d)) {
        last_doc[f] = static_cast<std::int64_t>(d);
        ++df[f];
      }
    }
  }
  const auto n = static_cast<double>(documents.size());
  std::vector<double> idf(features.size());
  for (std::size_t f = 0; f < features.size(); ++f) {
    idf[f] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[f]))) + 1.0;
  }
  return TfIdfVectorizer(std::move(features), std::move(idf), sublinear_tf);
}

TfIdfVectorizer TfIdfVectorizer::fit(const corpus::LabeledCorpus& corpus, std::int64_t min_count,
                                     bool sublinear_tf) {
  return fit(corpus.documents, min_count, sublinear_tf);
}

std::int64_t TfIdfVectorizer::feature_index(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

SparseVector TfIdfVectorizer::transform(std::span<const std::string> tokens) const {
  std::vector<std::uint32_t> hits;
  hits.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = index_.find(std::string_view(t));
    if (it != index_.end()) hits.push_back(it->second);
  }
  std::sort(hits.begin(), hits.end());

  SparseVector out;
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    while (j < hits.size() && hits[j] == hits[i]) ++j;
    const auto count = static_cast<double>(j - i);
    const double tf = sublinear_tf_ ? 1.0 + std::log(count) : count;
    out.index.push_back(hits[i]);
    out.value.push_back(tf * idf_[hits[i]]);
    i = j;
  }
  const double norm = out.norm();
  if (norm > 0.0) {
    for (auto& v : out.value) v /= norm;
  }
  return out;
}

std::uint64_t TfIdfVectorizer::vocabulary_hash() const {
  std::uint64_t h = fnv1a("features");
  for (const auto& f : features_) {
    h = fnv1a(f, h);
    h = fnv1a(std::string_view("\n", 1), h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// logistic regression

namespace {

void softmax_inplace(std::span<double> logits) {
  double m = -INFINITY;
  for (double v : logits) m = std::max(m, v);
  double total = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - m);
    total += v;
  }
  for (auto& v : logits) v /= total;
}

void check_shapes(const LogRegModel& model, std::span<const SparseVector> X,
                  std::span<const std::size_t> y) {
  if (X.size() != y.size()) throw Error("invalid_argument", "X and y differ in length");
  for (std::size_t label : y) {
    if (label >= model.num_classes) throw Error("invalid_argument", "label out of range");
  }
  for (const auto& x : X) {
    if (!x.index.empty() && x.index.back() >= model.num_features) {
      throw Error("invalid_argument", "feature index out of range");
    }
  }
}

/// Accumulates the unnormalized data term of the gradient; returns the summed NLL.
double accumulate_data_gradient(const LogRegModel& model, std::span<const SparseVector> X,
                                std::span<const std::size_t> y, std::span<double> grad_w,
                                std::span<double> grad_b) {
  const std::size_t C = model.num_classes;
  const std::size_t F = model.num_features;
  std::vector<double> p(C);
  double nll = 0.0;
  for (std::size_t n = 0; n < X.size(); ++n) {
    const auto& x = X[n];
    for (std::size_t c = 0; c < C; ++c) {
      double z = model.b[c];
      const double* row = model.W.data() + c * F;
      for (std::size_t j = 0; j < x.nnz(); ++j) z += row[x.index[j]] * x.value[j];
      p[c] = z;
    }
    softmax_inplace(p);
    nll -= std::log(std::max(p[y[n]], std::numeric_limits<double>::min()));
    for (std::size_t c = 0; c < C; ++c) {
      const double r = p[c] - (c == y[n] ? 1.0 : 0.0);
      grad_b[c] += r;
      double* grow = grad_w.data() + c * F;
      for (std::size_t j = 0; j < x.nnz(); ++j) grow[x.index[j]] += r * x.value[j];
    }
  }
  return nll;
}

}  // namespace

std::vector<double> LogRegModel::predict_proba(const SparseVector& x) const {
  std::vector<double> z(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    double s = b[c];
    const double* r = W.data() + c * num_features;
    for (std::size_t j = 0; j < x.nnz(); ++j) {
      if (x.index[j] >= num_features) throw Error("invalid_argument", "feature index out of range");
      s += r[x.index[j]] * x.value[j];
    }
    z[c] = s;
  }
  softmax_inplace(z);
  return z;
}

double logreg_loss(const LogRegModel& model, std::span<const SparseVector> X,
                   std::span<const std::size_t> y, double l2_lambda) {
  check_shapes(model, X, y);
  std::vector<double> gw(model.W.size(), 0.0);
  std::vector<double> gb(model.num_classes, 0.0);
  const double nll = accumulate_data_gradient(model, X, y, gw, gb);
  double sq = 0.0;
  for (double w : model.W) sq += w * w;
  return nll / static_cast<double>(X.size()) + 0.5 * l2_lambda * sq;
}

void logreg_gradient(const LogRegModel& model, std::span<const SparseVector> X,
                     std::span<const std::size_t> y, double l2_lambda, std::span<double> grad_w,
                     std::span<double> grad_b) {
  check_shapes(model, X, y);
  if (grad_w.size() != model.W.size() || grad_b.size() != model.num_classes) {
    throw Error("invalid_argument", "gradient buffers have the wrong size");
  }
  simd::fill(grad_w, 0.0);
  simd::fill(grad_b, 0.0);
  accumulate_data_gradient(model, X, y, grad_w, grad_b);
  const double inv_n = 1.0 / static_cast<double>(X.size());
  simd::axpby(inv_n, grad_w, l2_lambda, model.W, grad_w);
  for (auto& g : grad_b) g *= inv_n;
}

LogRegModel fit_logreg(std::span<const SparseVector> X, std::span<const std::size_t> y,
                       std::size_t num_classes, std::size_t num_features,
                       const LogRegParams& params) {
  if (X.empty()) throw Error("empty_corpus", "no training examples");
  if (!(params.l2_lambda >= 0.0)) throw Error("invalid_argument", "l2_lambda must be >= 0");
  if (!(params.lr > 0.0)) throw Error("invalid_argument", "lr must be > 0");
  if (params.max_iters < 0) throw Error("invalid_argument", "max_iters must be >= 0");

  LogRegModel model;
  model.num_classes = num_classes;
  model.num_features = num_features;
  model.W.assign(num_classes * num_features, 0.0);
  model.b.assign(num_classes, 0.0);
  model.params = params;
  check_shapes(model, X, y);

  std::vector<bool> seen(num_classes, false);
  std::size_t distinct = 0;
  for (std::size_t label : y) {
    if (!seen[label]) {
      seen[label] = true;
      ++distinct;
    }
  }
  if (distinct < 2) {
    throw Error("degenerate_corpus", "logistic regression needs at least 2 represented classes");
  }

  std::vector<double> gw(model.W.size());
  std::vector<double> gb(num_classes);
  for (int it = 0; it < params.max_iters; ++it) {
    logreg_gradient(model, X, y, params.l2_lambda, gw, gb);
    const double gnorm = std::max(simd::max_abs(gw), simd::max_abs(gb));
    if (gnorm < params.tol) break;
    simd::axpy(-params.lr, gw, model.W);
    simd::axpy(-params.lr, gb, model.b);
    model.trained_iterations = it + 1;
  }
  return model;
}

ClassId argmax(std::span<const double> probs) {
  ClassId best = 0;
  for (ClassId c = 1; c < probs.size(); ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  return best;
}

void sort_ranked(RankedWords& words) {
  std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
}

// ---------------------------------------------------------------------------
// glass-box

GlassBox::GlassBox(std::vector<std::string> class_names, TfIdfVectorizer vectorizer,
                   LogRegModel model)
    : class_names_(std::move(class_names)),
      vectorizer_(std::move(vectorizer)),
      model_(std::move(model)) {
  if (model_.num_classes != class_names_.size() ||
      model_.num_features != vectorizer_.num_features() ||
      model_.W.size() != model_.num_classes * model_.num_features ||
      model_.b.size() != model_.num_classes) {
    throw Error("invalid_argument", "glass-box parts have inconsistent shapes");
  }
}

GlassBox GlassBox::train(const corpus::LabeledCorpus& corpus, const LogRegParams& params,
                         std::int64_t min_count) {
  corpus.validate_labeled();
  auto vec = TfIdfVectorizer::fit(corpus, min_count);
  std::vector<SparseVector> X;
  std::vector<std::size_t> y;
  X.reserve(corpus.documents.size());
  y.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) {
    X.push_back(vec.transform(d));
    y.push_back(*d.label);
  }
  auto model = fit_logreg(X, y, corpus.class_names.size(), vec.num_features(), params);
  return GlassBox(corpus.class_names, std::move(vec), std::move(model));
}

std::vector<double> GlassBox::score(std::string_view text) const {
  const auto toks = corpus::tokenize(text);
  return score_tokens(toks);
}

std::vector<double> GlassBox::score_tokens(std::span<const std::string> tokens) const {
  return model_.predict_proba(vectorizer_.transform(tokens));
}

std::int64_t GlassBox::class_index(std::string_view name) const {
  for (std::size_t c = 0; c < class_names_.size(); ++c) {
    if (class_names_[c] == name) return static_cast<std::int64_t>(c);
  }
  return -1;
}

RankedWords GlassBox::top_words(ClassId cls, double threshold) const {
  if (cls >= num_classes()) throw Error("invalid_argument", "class id out of range");
  RankedWords out;
  const auto row = model_.row(cls);
  for (std::size_t f = 0; f < row.size(); ++f) {
    if (row[f] > threshold) out.emplace_back(vectorizer_.features()[f], row[f]);
  }
  sort_ranked(out);
  return out;
}

double GlassBox::accuracy(const corpus::LabeledCorpus& corpus) const {
  if (corpus.documents.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& d : corpus.documents) {
    if (!d.label) throw Error("inconsistent_labeling", "accuracy needs a labeled corpus");
    const auto name = corpus.class_names.at(*d.label);
    if (static_cast<std::int64_t>(argmax(score_tokens(d.tokens))) == class_index(name)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(corpus.documents.size());
}

std::string GlassBox::to_json() const {
  nlohmann::json j;
  j["format"] = "coop-glassbox";
  j["version"] = 1;
  j["class_names"] = class_names_;
  j["vocabulary"] = vectorizer_.features();
  j["vocabulary_hash"] = hex64(vectorizer_.vocabulary_hash());
  j["idf"] = vectorizer_.idf();
  auto& rows = j["W"] = nlohmann::json::array();
  for (ClassId c = 0; c < model_.num_classes; ++c) {
    const auto r = model_.row(c);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["b"] = model_.b;
  j["hyperparameters"] = {{"l2_lambda", model_.params.l2_lambda},
                          {"max_iters", model_.params.max_iters},
                          {"lr", model_.params.lr},
                          {"tol", model_.params.tol},
                          {"sublinear_tf", vectorizer_.sublinear_tf()},
                          {"norm", "l2"}};
  j["trained_iterations"] = model_.trained_iterations;
  j["metadata"] = metadata;
  return j.dump();
}

GlassBox GlassBox::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "coop-glassbox") {
      throw Error("malformed_model", "not a glass-box model file");
    }
    const auto& hp = j.at("hyperparameters");
    TfIdfVectorizer vec(j.at("vocabulary").get<std::vector<std::string>>(),
                        j.at("idf").get<std::vector<double>>(),
                        hp.value("sublinear_tf", false));
    if (j.contains("vocabulary_hash") &&
        j["vocabulary_hash"].get<std::string>() != hex64(vec.vocabulary_hash())) {
      throw Error("malformed_model", "glass-box vocabulary hash does not match its vocabulary");
    }
    LogRegModel m;
    m.num_classes = j.at("class_names").size();
    m.num_features = vec.num_features();
    for (const auto& row : j.at("W")) {
      const auto r = row.get<std::vector<double>>();
      if (r.size() != m.num_features) throw Error("malformed_model", "W row has the wrong width");
      m.W.insert(m.W.end(), r.begin(), r.end());
    }
    m.b = j.at("b").get<std::vector<double>>();
    m.params.l2_lambda = hp.at("l2_lambda").get<double>();
    m.params.max_iters = hp.at("max_iters").get<int>();
    m.params.lr = hp.at("lr").get<double>();
    m.params.tol = hp.at("tol").get<double>();
    m.trained_iterations = j.value("trained_iterations", 0);
    GlassBox gb(j.at("class_names").get<std::vector<std::string>>(), std::move(vec), std::move(m));
    if (j.contains("metadata")) gb.metadata = j["metadata"].get<std::map<std::string, std::string>>();
    return gb;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_model", std::string("glass-box JSON: ") + e.what());
  }
}

void GlassBox::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write '" + path + "'");
  out << to_json() << '\n';
}

GlassBox GlassBox::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("file_not_found", "cannot open glass-box '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string GlassBox::importance_csv() const {
  std::string out = "class,token,weight\n";
  for (ClassId c = 0; c < num_classes(); ++c) {
    for (const auto& [tok, w] : ranked_words(c)) {
      out += class_names_[c] + "," + tok + "," + format_double(w) + "\n";
    }
  }
  return out;
}

}  // namespace coop::glassbox
