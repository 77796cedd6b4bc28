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

#include "coop/explainer.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "json.hpp"

namespace coop::explainer {

namespace {
constexpr std::uint64_t kBaselineStream = 0xba5e11e;
}

std::string_view to_string(Mode m) { return m == Mode::therapy ? "therapy" : "baseline"; }

Mode parse_mode(std::string_view s) {
  if (s == "therapy") return Mode::therapy;
  if (s == "baseline") return Mode::baseline;
  throw Error("invalid_config", "mode must be 'therapy' or 'baseline', got '" + std::string(s) + "'");
}

void ExplainerConfig::validate() const {
  if (texts_per_class < 1) throw Error("invalid_config", "texts_per_class must be >= 1");
  if (workers < 1) throw Error("invalid_config", "workers must be >= 1");
  mcts.validate();
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> threads;
  threads.reserve(count);
  for (std::size_t t = 0; t < count; ++t) threads.emplace_back(work);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// samples

std::string samples_to_jsonl(const std::vector<GeneratedSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["text"] = s.text;
    j["class"] = s.cls;
    j["final_score"] = s.final_score;
    j["seed"] = s.seed;
    j["config_hash"] = s.config_hash;
    out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

std::vector<GeneratedSample> samples_from_jsonl(std::string_view jsonl) {
  std::vector<GeneratedSample> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const auto line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GeneratedSample s;
      s.text = j.at("text").get<std::string>();
      s.cls = j.at("class").get<std::string>();
      s.final_score = j.at("final_score").get<double>();
      s.seed = j.at("seed").get<std::uint64_t>();
      s.config_hash = j.value("config_hash", std::string());
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed_corpus",
                  "line " + std::to_string(line_no) + ": bad generated sample (" + e.what() + ")");
    }
  }
  return out;
}

GeneratedCorpus corpus_from_samples(std::vector<GeneratedSample> samples,
                                    const std::vector<std::string>& class_names) {
  GeneratedCorpus g;
  g.corpus.class_names = class_names;
  for (const auto& s : samples) {
    auto it = std::find(class_names.begin(), class_names.end(), s.cls);
    if (it == class_names.end()) {
      throw Error("invalid_label", "generated sample has unknown class '" + s.cls + "'");
    }
    g.corpus.documents.push_back(corpus::Document::from_text(
        s.text, static_cast<std::size_t>(it - class_names.begin())));
  }
  g.samples = std::move(samples);
  return g;
}

// ---------------------------------------------------------------------------
// generation

GeneratedCorpus generate_class_corpus(const lm::LanguageModel& lm,
                                      const glassbox::ClassifierScorer& scorer,
                                      const std::vector<std::string>& class_names, ClassId cls,
                                      int n, const ExplainerConfig& config) {
  if (n < 1) throw Error("invalid_argument", "n must be >= 1");
  if (cls >= class_names.size() || class_names.size() != scorer.num_classes()) {
    throw Error("invalid_argument", "class id / class names do not match the scorer");
  }
  config.mcts.validate();

  std::vector<GeneratedSample> samples(static_cast<std::size_t>(n));
  parallel_for(samples.size(), config.workers, [&](std::size_t i) {
    mcts::MctsConfig mc = config.mcts;
    mc.rng_seed = derive_seed(config.seed, cls + 1, i);
    const auto r = mcts::generate(lm, scorer, cls, {}, mc);
    samples[i] = GeneratedSample{r.text, class_names[cls], r.final_score, mc.rng_seed,
                                 config.config_hash};
  });
  return corpus_from_samples(std::move(samples), class_names);
}

GeneratedCorpus generate_baseline_corpus(const lm::LanguageModel& lm,
                                         const glassbox::ClassifierScorer& scorer,
                                         const std::vector<std::string>& class_names,
                                         int n_total, const ExplainerConfig& config) {
  if (class_names.size() != scorer.num_classes()) {
    throw Error("invalid_argument", "class names do not match the scorer");
  }
  if (n_total < static_cast<int>(class_names.size())) {
    throw Error("invalid_argument", "n_total must be >= the number of classes");
  }
  config.mcts.validate();

  std::vector<GeneratedSample> samples(static_cast<std::size_t>(n_total));
  parallel_for(samples.size(), config.workers, [&](std::size_t i) {
    const auto seed = derive_seed(config.seed, kBaselineStream, i);
    const auto toks = lm::sample_continuation(lm, {}, static_cast<std::size_t>(config.mcts.max_length),
                                              seed, config.mcts.rollout_temperature);
    const auto text = mcts::sequence_text(lm, toks);
    const auto probs = scorer.score(text);
    const auto label = glassbox::argmax(probs);
    samples[i] = GeneratedSample{text, class_names[label], probs[label], seed, config.config_hash};
  });
  auto g = corpus_from_samples(std::move(samples), class_names);
  const auto counts = g.corpus.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      g.warnings.push_back("class '" + class_names[c] + "' absent from baseline labels");
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// explanation

std::string Explanation::to_csv() const {
  std::string out = "class,token,weight,rank\n";
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::size_t rank = 0;
    for (const auto& [tok, w] : ranked[c]) {
      out += class_names[c] + "," + tok + "," + format_double(w) + "," + std::to_string(++rank) +
             "\n";
    }
  }
  return out;
}

std::string Explanation::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "coop-explanation";
  j["version"] = 1;
  j["metadata"] = metadata;
  j["class_names"] = class_names;
  j["class_counts"] = class_counts;
  j["warnings"] = warnings;
  auto& classes = j["classes"] = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [tok, w] : ranked[c]) {
      arr.push_back({{"token", tok}, {"weight", w}});
    }
    classes[class_names[c]] = std::move(arr);
  }
  return j.dump(1);
}

Explanation Explanation::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "coop-explanation") {
      throw Error("malformed_explanation", "not an explanation file");
    }
    Explanation e;
    e.class_names = j.at("class_names").get<std::vector<std::string>>();
    e.metadata = j.value("metadata", std::map<std::string, std::string>{});
    e.class_counts = j.value("class_counts", std::vector<std::size_t>{});
    e.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& name : e.class_names) {
      glassbox::RankedWords words;
      for (const auto& item : j.at("classes").at(name)) {
        words.emplace_back(item.at("token").get<std::string>(), item.at("weight").get<double>());
      }
      e.ranked.push_back(std::move(words));
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error("malformed_explanation", std::string("explanation JSON: ") + ex.what());
  }
}

Explanation fit_explanation(const corpus::LabeledCorpus& generated,
                            const glassbox::LogRegParams& params) {
  if (generated.empty()) throw Error("empty_corpus", "empty corpus");
  if (!generated.labeled()) throw Error("inconsistent_labeling", "generated corpus must be labeled");

  const auto counts = generated.class_counts();
  std::vector<ClassId> present;
  for (ClassId c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) present.push_back(c);
  }
  if (present.size() < 2) {
    throw Error("degenerate_corpus", "explanation needs at least 2 classes with generated texts");
  }

  // Canonical order: the fit must not depend on how documents were gathered.
  std::vector<std::size_t> order(generated.documents.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = generated.documents[a];
    const auto& db = generated.documents[b];
    if (da.text != db.text) return da.text < db.text;
    return generated.class_names[*da.label] < generated.class_names[*db.label];
  });
  std::vector<corpus::Document> docs;
  docs.reserve(order.size());
  for (auto i : order) docs.push_back(generated.documents[i]);

  const auto vec = glassbox::TfIdfVectorizer::fit(docs);
  std::vector<std::size_t> compact(generated.class_names.size(), 0);
  for (std::size_t k = 0; k < present.size(); ++k) compact[present[k]] = k;

  std::vector<glassbox::SparseVector> X;
  std::vector<std::size_t> y;
  X.reserve(docs.size());
  for (const auto& d : docs) {
    X.push_back(vec.transform(d));
    y.push_back(compact[*d.label]);
  }
  const auto model = glassbox::fit_logreg(X, y, present.size(), vec.num_features(), params);

  Explanation e;
  e.class_names = generated.class_names;
  e.class_counts = counts;
  e.ranked.resize(generated.class_names.size());
  for (std::size_t k = 0; k < present.size(); ++k) {
    auto& words = e.ranked[present[k]];
    const auto row = model.row(k);
    words.reserve(row.size());
    for (std::size_t f = 0; f < row.size(); ++f) words.emplace_back(vec.features()[f], row[f]);
    glassbox::sort_ranked(words);
  }
  for (ClassId c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      e.warnings.push_back("class '" + generated.class_names[c] + "' has no generated texts");
    }
  }
  e.metadata["l2_lambda"] = format_double(params.l2_lambda);
  e.metadata["lr"] = format_double(params.lr);
  e.metadata["max_iters"] = std::to_string(params.max_iters);
  e.metadata["tol"] = format_double(params.tol);
  e.metadata["trained_iterations"] = std::to_string(model.trained_iterations);
  e.metadata["stop_words"] = "none";
  e.metadata["num_features"] = std::to_string(vec.num_features());
  return e;
}

ExplainResult explain(const lm::LanguageModel& lm, const glassbox::ClassifierScorer& scorer,
                      const std::vector<std::string>& class_names, const ExplainerConfig& config) {
  config.validate();
  if (class_names.size() < 2) throw Error("invalid_argument", "explain needs at least 2 classes");

  ExplainResult out;
  if (config.mode == Mode::therapy) {
    out.generated.corpus.class_names = class_names;
    for (ClassId c = 0; c < class_names.size(); ++c) {
      auto g = generate_class_corpus(lm, scorer, class_names, c, config.texts_per_class, config);
      for (auto& d : g.corpus.documents) out.generated.corpus.documents.push_back(std::move(d));
      for (auto& s : g.samples) out.generated.samples.push_back(std::move(s));
    }
  } else {
    out.generated = generate_baseline_corpus(
        lm, scorer, class_names, config.texts_per_class * static_cast<int>(class_names.size()),
        config);
  }

  out.explanation = fit_explanation(out.generated.corpus, config.regression);
  out.explanation.metadata["method"] = std::string(to_string(config.mode));
  out.explanation.metadata["config_hash"] = config.config_hash;
  out.explanation.metadata["texts_per_class"] = std::to_string(config.texts_per_class);
  out.explanation.metadata["mcts"] = config.mcts.canonical();
  out.explanation.metadata["generated_corpus_hash"] = hex64(corpus::corpus_hash(out.generated.corpus));
  for (const auto& w : out.generated.warnings) out.explanation.warnings.push_back(w);
  return out;
}

}  // namespace coop::explainer
