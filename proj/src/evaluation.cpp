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

#include "coop/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "coop/simd/kernels.hpp"
#include "json.hpp"

namespace coop::eval {

// ---------------------------------------------------------------------------
// ImportanceMap

ImportanceMap ImportanceMap::from_explanation(const explainer::Explanation& e) {
  ImportanceMap m;
  m.class_names = e.class_names;
  m.source = e.metadata.count("method") ? e.metadata.at("method") : "explanation";
  for (const auto& words : e.ranked) {
    m.weights.emplace_back(words.begin(), words.end());
  }
  m.validate();
  return m;
}

ImportanceMap ImportanceMap::from_glassbox(const glassbox::GlassBox& gb) {
  ImportanceMap m;
  m.class_names = gb.class_names();
  m.source = "glassbox";
  for (ClassId c = 0; c < gb.num_classes(); ++c) {
    const auto words = gb.ranked_words(c);
    m.weights.emplace_back(words.begin(), words.end());
  }
  return m;
}

namespace {
std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}
}  // namespace

ImportanceMap ImportanceMap::from_csv(std::string_view csv, std::string source) {
  ImportanceMap m;
  m.source = std::move(source);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header = true;
  while (pos < csv.size()) {
    auto end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    auto line = csv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (header) {
      header = false;
      if (cols.size() < 3 || cols[0] != "class" || cols[1] != "token" || cols[2] != "weight") {
        throw Error("malformed_importance", "expected header 'class,token,weight'");
      }
      continue;
    }
    if (cols.size() < 3 || cols.size() > 4) {
      throw Error("malformed_importance", "line " + std::to_string(line_no) + ": expected 3 or 4 columns");
    }
    double w;
    try {
      std::size_t used = 0;
      w = std::stod(std::string(cols[2]), &used);
      if (used != cols[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error("malformed_importance", "line " + std::to_string(line_no) + ": bad weight");
    }
    const std::string cls(cols[0]);
    auto it = std::find(m.class_names.begin(), m.class_names.end(), cls);
    if (it == m.class_names.end()) {
      m.class_names.push_back(cls);
      m.weights.emplace_back();
      it = m.class_names.end() - 1;
    }
    m.weights[static_cast<std::size_t>(it - m.class_names.begin())][std::string(cols[1])] = w;
  }
  if (header) throw Error("malformed_importance", "empty importance file");
  m.validate();
  return m;
}

ImportanceMap ImportanceMap::load_csv(const std::string& path, std::string source) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("file_not_found", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_csv(ss.str(), std::move(source));
}

void ImportanceMap::validate() const {
  if (weights.size() != class_names.size()) {
    throw Error("invalid_importance", "class names and weight maps differ in size");
  }
  for (std::size_t c = 0; c < weights.size(); ++c) {
    for (const auto& [tok, w] : weights[c]) {
      if (!std::isfinite(w)) {
        throw Error("invalid_importance",
                    "non-finite weight for '" + tok + "' in class '" + class_names[c] + "'");
      }
    }
  }
}

const std::map<std::string, double>* ImportanceMap::find(std::string_view cls) const {
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    if (class_names[c] == cls) return &weights[c];
  }
  return nullptr;
}

glassbox::RankedWords ImportanceMap::ranked(std::string_view cls) const {
  glassbox::RankedWords out;
  if (const auto* m = find(cls)) {
    out.assign(m->begin(), m->end());
    glassbox::sort_ranked(out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spearman

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 hold ranks i+1..j.
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("invalid_argument", "spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw Error("reference_too_small", "reference set too small");

  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double mx = simd::sum(rx) * inv_n;
  const double my = simd::sum(ry) * inv_n;
  simd::shift_scale(rx, -mx, 1.0, rx);
  simd::shift_scale(ry, -my, 1.0, ry);
  const double sxy = simd::dot(rx, ry);
  const double sxx = simd::dot(rx, rx);
  const double syy = simd::dot(ry, ry);

  Correlation out;
  out.n = n;
  if (sxx <= 0.0 || syy <= 0.0) return out;  // constant input: rho 0, p 1
  out.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(out.rho) >= 1.0) {
    out.p = 0.0;
    return out;
  }
  const double df = static_cast<double>(n - 2);
  const double t = out.rho * std::sqrt(df / (1.0 - out.rho * out.rho));
  const boost::math::students_t dist(df);
  out.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
  return out;
}

namespace {
glassbox::RankedWords reference_set(const glassbox::GlassBox& gb, ClassId cls, double threshold) {
  if (cls >= gb.num_classes()) throw Error("invalid_argument", "class id out of range");
  auto ref = gb.top_words(cls, threshold);
  if (ref.size() < 3) throw Error("reference_too_small", "reference set too small");
  return ref;
}
}  // namespace

Correlation spearman_vs_glassbox(const ImportanceMap& expl, const glassbox::GlassBox& gb,
                                 ClassId cls, double threshold) {
  const auto ref = reference_set(gb, cls, threshold);
  const auto* scores = expl.find(gb.class_names()[cls]);
  std::vector<double> x, y;
  x.reserve(ref.size());
  y.reserve(ref.size());
  for (const auto& [tok, w] : ref) {
    x.push_back(w);
    double s = 0.0;
    if (scores) {
      auto it = scores->find(tok);
      if (it != scores->end()) s = it->second;
    }
    y.push_back(s);
  }
  return spearman(x, y);
}

Correlation mean_spearman(const ImportanceMap& expl, const glassbox::GlassBox& gb,
                          double threshold) {
  Correlation out;
  double rho = 0.0, p = 0.0;
  std::size_t used = 0;
  for (ClassId c = 0; c < gb.num_classes(); ++c) {
    try {
      const auto r = spearman_vs_glassbox(expl, gb, c, threshold);
      rho += r.rho;
      p += r.p;
      out.n += r.n;
      ++used;
    } catch (const Error& e) {
      if (e.code() != "reference_too_small") throw;
    }
  }
  if (used == 0) throw Error("reference_too_small", "reference set too small");
  out.rho = rho / static_cast<double>(used);
  out.p = p / static_cast<double>(used);
  return out;
}

// ---------------------------------------------------------------------------
// precision / recall

std::vector<PrPoint> precision_recall_curve(const ImportanceMap& expl,
                                            const glassbox::GlassBox& gb, ClassId cls,
                                            std::span<const std::size_t> ks, double threshold) {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0) throw Error("invalid_argument", "ks must be positive");
    if (i > 0 && ks[i] <= ks[i - 1]) throw Error("invalid_argument", "ks must be ascending");
  }
  const auto ref = reference_set(gb, cls, threshold);
  std::set<std::string, std::less<>> topset;
  for (const auto& [tok, w] : ref) topset.insert(tok);
  const auto ranked = expl.ranked(gb.class_names()[cls]);

  std::vector<PrPoint> out;
  std::size_t hits = 0;
  std::size_t seen = 0;
  for (const auto k : ks) {
    while (seen < k && seen < ranked.size()) {
      if (topset.count(ranked[seen].first)) ++hits;
      ++seen;
    }
    out.push_back({k, static_cast<double>(hits) / static_cast<double>(k),
                   static_cast<double>(hits) / static_cast<double>(topset.size())});
  }
  return out;
}

// ---------------------------------------------------------------------------
// insertion / deletion

double FlipCurve::rate_at(std::size_t r) const {
  if (flip_rate.empty()) return 0.0;
  return flip_rate[std::min(r, flip_rate.size() - 1)];
}

namespace {
std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s.push_back(' ');
    s += t;
  }
  return s;
}

ClassId runner_up(std::span<const double> probs, ClassId top) {
  ClassId best = top == 0 ? 1 : 0;
  for (ClassId c = 0; c < probs.size(); ++c) {
    if (c != top && probs[c] > probs[best]) best = c;
  }
  return best;
}
}  // namespace

FlipCurve insertion_deletion(const glassbox::ClassifierScorer& scorer,
                             const std::vector<std::string>& class_names,
                             std::span<const corpus::Document> texts, const ImportanceMap& expl,
                             std::size_t top_k, std::size_t max_texts) {
  if (top_k < 1) throw Error("invalid_argument", "top_k must be >= 1");
  if (class_names.size() != scorer.num_classes() || class_names.size() < 2) {
    throw Error("invalid_argument", "class names do not match the scorer");
  }

  std::vector<glassbox::RankedWords> ranked;
  for (const auto& name : class_names) {
    auto words = expl.ranked(name);
    if (words.size() > top_k) words.resize(top_k);
    ranked.push_back(std::move(words));
  }

  FlipCurve curve;
  curve.num_texts = std::min(max_texts, texts.size());
  curve.flipped_at.assign(curve.num_texts, -1);
  std::int64_t longest = 0;

  for (std::size_t t = 0; t < curve.num_texts; ++t) {
    auto tokens = texts[t].tokens;
    const auto probs0 = scorer.score(join_tokens(tokens));
    const ClassId orig = glassbox::argmax(probs0);
    const auto& fill = ranked[runner_up(probs0, orig)];
    std::vector<bool> replaced(tokens.size(), false);
    std::int64_t r = 0;
    bool flipped = false;

    for (const auto& [word, w] : ranked[orig]) {
      const std::string* repl = nullptr;
      for (const auto& [cand, cw] : fill) {
        if (cand != word) {
          repl = &cand;
          break;
        }
      }
      if (!repl) break;
      for (std::size_t i = 0; i < tokens.size() && !flipped; ++i) {
        if (replaced[i] || tokens[i] != word) continue;
        tokens[i] = *repl;
        replaced[i] = true;
        ++r;
        if (glassbox::argmax(scorer.score(join_tokens(tokens))) != orig) flipped = true;
      }
      if (flipped) break;
    }
    if (flipped) curve.flipped_at[t] = r;
    longest = std::max(longest, r);
  }

  curve.flip_rate.assign(static_cast<std::size_t>(longest) + 1, 0.0);
  if (curve.num_texts > 0) {
    for (const auto f : curve.flipped_at) {
      if (f < 0) continue;
      for (auto r = static_cast<std::size_t>(f); r < curve.flip_rate.size(); ++r) {
        curve.flip_rate[r] += 1.0;
      }
    }
    for (auto& v : curve.flip_rate) v /= static_cast<double>(curve.num_texts);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// report

EvalReport evaluate(const ImportanceMap& expl, const glassbox::GlassBox& gb,
                    std::span<const corpus::Document> texts, const EvalOptions& options) {
  expl.validate();
  EvalReport report;
  report.metadata["source"] = expl.source;
  report.metadata["threshold"] = format_double(options.threshold);
  report.metadata["top_k"] = std::to_string(options.top_k);
  report.metadata["max_texts"] = std::to_string(options.max_texts);

  double rho = 0.0, p = 0.0;
  for (ClassId c = 0; c < gb.num_classes(); ++c) {
    ClassReport cr;
    cr.cls = gb.class_names()[c];
    cr.reference_size = gb.top_words(c, options.threshold).size();
    if (cr.reference_size < 3) {
      report.warnings.push_back("class '" + cr.cls + "': reference set too small (" +
                                std::to_string(cr.reference_size) + " words)");
      continue;
    }
    if (!expl.find(cr.cls)) {
      report.warnings.push_back("class '" + cr.cls + "' missing from the importance map");
    }
    cr.spearman = spearman_vs_glassbox(expl, gb, c, options.threshold);
    cr.pr_curve = precision_recall_curve(expl, gb, c, options.ks, options.threshold);
    rho += cr.spearman.rho;
    p += cr.spearman.p;
    report.classes.push_back(std::move(cr));
  }
  if (!report.classes.empty()) {
    const double n = static_cast<double>(report.classes.size());
    report.mean_rho = rho / n;
    report.mean_p = p / n;
    for (std::size_t i = 0; i < options.ks.size(); ++i) {
      PrPoint pt{options.ks[i], 0.0, 0.0};
      for (const auto& cr : report.classes) {
        pt.precision += cr.pr_curve[i].precision;
        pt.recall += cr.pr_curve[i].recall;
      }
      pt.precision /= n;
      pt.recall /= n;
      report.mean_pr_curve.push_back(pt);
    }
  }
  if (!texts.empty()) {
    report.flips = insertion_deletion(gb, texts, expl, options.top_k, options.max_texts);
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "coop-eval-report";
  j["version"] = 1;
  j["metadata"] = metadata;
  j["mean_rho"] = mean_rho;
  j["mean_p"] = mean_p;
  auto& cls = j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes) {
    nlohmann::ordered_json cj;
    cj["class"] = c.cls;
    cj["rho"] = c.spearman.rho;
    cj["p"] = c.spearman.p;
    cj["reference_size"] = c.reference_size;
    auto& pr = cj["pr_curve"] = nlohmann::ordered_json::array();
    for (const auto& pt : c.pr_curve) {
      pr.push_back({{"k", pt.k}, {"precision", pt.precision}, {"recall", pt.recall}});
    }
    cls.push_back(std::move(cj));
  }
  auto& flip = j["flip_curve"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < flips.flip_rate.size(); ++r) {
    flip.push_back({{"replacements", r}, {"flip_rate", flips.flip_rate[r]}});
  }
  j["flip_texts"] = flips.num_texts;
  j["warnings"] = warnings;
  return j.dump(1);
}

std::string EvalReport::pr_csv() const {
  std::string out = "k,precision,recall\n";
  for (const auto& pt : mean_pr_curve) {
    out += std::to_string(pt.k) + "," + format_double(pt.precision) + "," +
           format_double(pt.recall) + "\n";
  }
  return out;
}

std::string EvalReport::flip_csv() const {
  std::string out = "replacements,flip_rate\n";
  for (std::size_t r = 0; r < flips.flip_rate.size(); ++r) {
    out += std::to_string(r) + "," + format_double(flips.flip_rate[r]) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// sweep

corpus::LabeledCorpus truncate_per_class(const corpus::LabeledCorpus& corpus, std::size_t size) {
  if (!corpus.labeled()) throw Error("inconsistent_labeling", "sweep needs a labeled corpus");
  corpus::LabeledCorpus out;
  out.class_names = corpus.class_names;
  std::vector<std::size_t> taken(corpus.class_names.size(), 0);
  for (const auto& d : corpus.documents) {
    auto& n = taken[*d.label];
    if (n < size) {
      out.documents.push_back(d);
      ++n;
    }
  }
  for (auto n : taken) {
    if (n < size) throw Error("insufficient_corpus", "insufficient corpus");
  }
  return out;
}

std::vector<SweepPoint> sweep_from_corpora(std::span<const corpus::LabeledCorpus> per_seed,
                                           const glassbox::GlassBox& gb,
                                           std::span<const std::size_t> sizes, double threshold,
                                           const glassbox::LogRegParams& params) {
  if (per_seed.empty()) throw Error("invalid_argument", "sweep needs at least one corpus");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw Error("invalid_argument", "sweep sizes must be positive");
    if (i > 0 && sizes[i] < sizes[i - 1]) throw Error("invalid_argument", "sweep sizes must be ascending");
  }
  std::vector<SweepPoint> out;
  for (const auto s : sizes) {
    SweepPoint pt;
    pt.size = s;
    double p = 0.0;
    for (const auto& corpus : per_seed) {
      const auto expl = explainer::fit_explanation(truncate_per_class(corpus, s), params);
      const auto m = mean_spearman(ImportanceMap::from_explanation(expl), gb, threshold);
      pt.per_seed_rho.push_back(m.rho);
      p += m.p;
    }
    const double n = static_cast<double>(per_seed.size());
    pt.mean_rho = std::accumulate(pt.per_seed_rho.begin(), pt.per_seed_rho.end(), 0.0) / n;
    pt.mean_p = p / n;
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<SweepPoint> sweep_num_texts(const lm::LanguageModel& lm, const glassbox::GlassBox& gb,
                                        std::span<const std::size_t> sizes,
                                        const explainer::ExplainerConfig& config,
                                        std::span<const std::uint64_t> seeds, double threshold) {
  if (sizes.empty()) throw Error("invalid_argument", "sweep needs at least one size");
  if (seeds.empty()) throw Error("invalid_argument", "sweep needs at least one seed");
  const auto largest = *std::max_element(sizes.begin(), sizes.end());
  std::vector<corpus::LabeledCorpus> corpora;
  for (const auto seed : seeds) {
    auto cfg = config;
    cfg.seed = seed;
    cfg.texts_per_class = static_cast<int>(largest);
    corpus::LabeledCorpus all;
    all.class_names = gb.class_names();
    for (ClassId c = 0; c < gb.num_classes(); ++c) {
      auto g = explainer::generate_class_corpus(lm, gb, gb.class_names(), c, cfg.texts_per_class, cfg);
      for (auto& d : g.corpus.documents) all.documents.push_back(std::move(d));
    }
    corpora.push_back(std::move(all));
  }
  return sweep_from_corpora(corpora, gb, sizes, threshold, config.regression);
}

std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "size,mean_rho,mean_p\n";
  for (const auto& pt : points) {
    out += std::to_string(pt.size) + "," + format_double(pt.mean_rho) + "," +
           format_double(pt.mean_p) + "\n";
  }
  return out;
}

}  // namespace coop::eval
