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

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "coop/explainer.hpp"
#include "coop/ngram_lm.hpp"
#include "doctest.h"
#include "toy_models.hpp"

using namespace coop;
using namespace coop::explainer;
using corpus::Document;
using corpus::LabeledCorpus;

namespace {

LabeledCorpus planted_binary() {
  LabeledCorpus c;
  c.class_names = {"pos", "neg"};
  const std::vector<std::string> filler{"the", "a", "film", "was", "plot", "and"};
  for (int i = 0; i < 60; ++i) {
    const std::string f1 = filler[static_cast<std::size_t>(i) % 6];
    const std::string f2 = filler[static_cast<std::size_t>(i * 5 + 1) % 6];
    c.documents.push_back(Document::from_text(f1 + " good " + f2, 0));
    c.documents.push_back(Document::from_text(f2 + " bad " + f1, 1));
    c.documents.push_back(Document::from_text(f1 + " " + f2, i % 2));
  }
  return c;
}

struct Fixture {
  LabeledCorpus train = planted_binary();
  lm::NGramLM lm = lm::NGramLM::fit(train, 2, 0.1);
  glassbox::GlassBox gb = glassbox::GlassBox::train(train);
};

ExplainerConfig small_config() {
  ExplainerConfig cfg;
  cfg.texts_per_class = 6;
  cfg.mcts.playouts_per_token = 10;
  cfg.mcts.max_length = 8;
  cfg.mcts.rollout_max_tokens = 8;
  cfg.seed = 3;
  cfg.config_hash = "cafe";
  return cfg;
}

LabeledCorpus from_rows(const std::vector<std::pair<std::string, std::size_t>>& rows,
                        std::vector<std::string> names) {
  LabeledCorpus c;
  c.class_names = std::move(names);
  for (const auto& [t, y] : rows) c.documents.push_back(Document::from_text(t, y));
  return c;
}

double weight_of(const glassbox::RankedWords& r, const std::string& w) {
  for (const auto& [t, v] : r) {
    if (t == w) return v;
  }
  return NAN;
}

}  // namespace

TEST_CASE("class corpora carry the guidance label and per-text seeds") {
  Fixture f;
  auto cfg = small_config();
  const auto g = generate_class_corpus(f.lm, f.gb, f.train.class_names, 1, 3, cfg);
  REQUIRE(g.corpus.documents.size() == 3);
  REQUIRE(g.samples.size() == 3);
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(g.corpus.documents[i].label == std::optional<std::size_t>(1));
    CHECK(g.samples[i].cls == "neg");
    CHECK(g.samples[i].config_hash == "cafe");
    CHECK(g.samples[i].seed == derive_seed(3, 2, i));
    CHECK(std::abs(f.gb.score(g.samples[i].text)[1] - g.samples[i].final_score) < 1e-9);
    seeds.insert(g.samples[i].seed);
  }
  CHECK(seeds.size() == 3);
  CHECK_THROWS_AS(generate_class_corpus(f.lm, f.gb, f.train.class_names, 0, 0, cfg), Error);
}

TEST_CASE("the same master seed reproduces the corpus, with any worker count") {
  Fixture f;
  auto cfg = small_config();
  const auto a = generate_class_corpus(f.lm, f.gb, f.train.class_names, 0, 8, cfg);
  cfg.workers = 3;
  const auto b = generate_class_corpus(f.lm, f.gb, f.train.class_names, 0, 8, cfg);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].text == b.samples[i].text);
    CHECK(a.samples[i].final_score == b.samples[i].final_score);
  }
}

TEST_CASE("guided texts score higher on their class than unguided samples") {
  Fixture f;
  auto cfg = small_config();
  cfg.mcts.playouts_per_token = 30;
  const auto g = generate_class_corpus(f.lm, f.gb, f.train.class_names, 0, 20, cfg);
  double guided = 0;
  for (const auto& s : g.samples) guided += s.final_score;
  guided /= static_cast<double>(g.samples.size());
  double unguided = 0;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    const auto seq = lm::sample_continuation(f.lm, {}, 8, derive_seed(77, 0, static_cast<std::uint64_t>(i)));
    unguided += f.gb.score(mcts::sequence_text(f.lm, seq))[0];
  }
  unguided /= n;
  INFO("guided ", guided, " unguided ", unguided);
  CHECK(guided > unguided);
}

TEST_CASE("baseline labels follow the scorer argmax with the low-id tie rule") {
  const toy::ToyLM lm({"x", "y", "</s>"}, [](std::span<const TokenId>) {
    return std::vector<double>{0.4, 0.4, 0.2};
  });
  const toy::FnScorer uniform([](std::string_view) { return 0.5; });
  auto cfg = small_config();
  const auto g = generate_baseline_corpus(lm, uniform, {"first", "second"}, 10, cfg);
  REQUIRE(g.corpus.documents.size() == 10);
  for (const auto& d : g.corpus.documents) CHECK(d.label == std::optional<std::size_t>(0));
  REQUIRE(g.warnings.size() == 1);
  CHECK(g.warnings[0].find("second") != std::string::npos);
  CHECK_THROWS_AS(generate_baseline_corpus(lm, uniform, {"first", "second"}, 1, cfg), Error);
}

TEST_CASE("a deterministic LM makes every baseline text identical") {
  const toy::ToyLM lm({"x", "y", "</s>"}, [](std::span<const TokenId> ctx) {
    if (ctx.size() >= 2) return std::vector<double>{0, 0, 1};
    return std::vector<double>{ctx.empty() ? 1.0 : 0.0, ctx.empty() ? 0.0 : 1.0, 0};
  });
  const toy::FnScorer scorer([](std::string_view t) { return t.size() > 2 ? 0.8 : 0.1; });
  const auto g = generate_baseline_corpus(lm, scorer, {"p", "q"}, 6, small_config());
  for (const auto& s : g.samples) CHECK(s.text == "x y");
}

TEST_CASE("baseline class shares match direct sampling statistics") {
  Fixture f;
  auto cfg = small_config();
  const int n = 300;
  const auto g = generate_baseline_corpus(f.lm, f.gb, f.train.class_names, n, cfg);
  const auto counts = g.corpus.class_counts();
  // Independent estimate from a separate sampling stream.
  int pos = 0;
  const int m = 3000;
  for (int i = 0; i < m; ++i) {
    const auto seq = lm::sample_continuation(f.lm, {}, static_cast<std::size_t>(cfg.mcts.max_length),
                                             derive_seed(1234, 0, static_cast<std::uint64_t>(i)));
    pos += glassbox::argmax(f.gb.score(mcts::sequence_text(f.lm, seq))) == 0;
  }
  const double p = static_cast<double>(pos) / m;
  const double share = static_cast<double>(counts[0]) / n;
  const double se = std::sqrt(p * (1 - p) / n + p * (1 - p) / m);
  INFO("baseline share ", share, " sampled ", p);
  CHECK(std::abs(share - p) < 4 * se + 1e-9);
}

TEST_CASE("separable corpus: each class's own word comes first") {
  const auto c = from_rows({{"good good", 0}, {"good good", 0}, {"bad bad", 1}, {"bad bad", 1}}, {"A", "B"});
  const auto e = fit_explanation(c);
  CHECK(e.ranked[0].front().first == "good");
  CHECK(e.ranked[1].front().first == "bad");
  CHECK(e.class_counts == std::vector<std::size_t>{2, 2});
}

TEST_CASE("a token shared by every class ranks below exclusive tokens") {
  const auto c = from_rows({{"alpha common", 0}, {"alpha common", 0}, {"beta common", 1},
                            {"beta common", 1}, {"gamma common", 2}, {"gamma common", 2}},
                           {"a", "b", "c"});
  const auto e = fit_explanation(c);
  const std::vector<std::string> own{"alpha", "beta", "gamma"};
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(weight_of(e.ranked[k], "common") < weight_of(e.ranked[k], own[k]));
    CHECK(e.ranked[k].front().first == own[k]);
  }
}

TEST_CASE("document order and class identity do not leak into the explanation") {
  std::vector<std::pair<std::string, std::size_t>> rows{
      {"red apple sweet", 0}, {"green apple", 0}, {"sweet red", 0},  {"blue sea", 1},
      {"sea wave blue", 1},   {"calm sea", 1},    {"apple sea", 0},  {"wave calm", 1}};
  const auto base = fit_explanation(from_rows(rows, {"fruit", "ocean"}));

  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    auto shuffled = rows;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto e = fit_explanation(from_rows(shuffled, {"fruit", "ocean"}));
    CHECK(e.ranked == base.ranked);
    CHECK(e.to_csv() == base.to_csv());
  }

  auto swapped = rows;
  for (auto& [t, y] : swapped) y = 1 - y;
  const auto s = fit_explanation(from_rows(swapped, {"ocean", "fruit"}));
  CHECK(s.ranked[0] == base.ranked[1]);
  CHECK(s.ranked[1] == base.ranked[0]);
}

TEST_CASE("explanation tokens come from the generated corpus; weights descend") {
  Fixture f;
  auto cfg = small_config();
  const auto r = explain(f.lm, f.gb, f.train.class_names, cfg);
  std::set<std::string> seen;
  for (const auto& d : r.generated.corpus.documents) seen.insert(d.tokens.begin(), d.tokens.end());
  for (const auto& ranked : r.explanation.ranked) {
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      CHECK(seen.count(ranked[i].first) == 1);
      if (i > 0) CHECK(ranked[i - 1].second >= ranked[i].second);
    }
  }
  CHECK(r.explanation.metadata.at("method") == "therapy");
  CHECK(r.explanation.metadata.at("config_hash") == "cafe");
  CHECK(r.generated.samples.size() == 12);
}

TEST_CASE("explain is deterministic and baseline mode runs end to end") {
  Fixture f;
  auto cfg = small_config();
  CHECK(explain(f.lm, f.gb, f.train.class_names, cfg).explanation.to_csv() ==
        explain(f.lm, f.gb, f.train.class_names, cfg).explanation.to_csv());
  cfg.mode = Mode::baseline;
  cfg.texts_per_class = 20;
  const auto r = explain(f.lm, f.gb, f.train.class_names, cfg);
  CHECK(r.generated.samples.size() == 40);
  CHECK(r.explanation.metadata.at("method") == "baseline");
}

TEST_CASE("absent classes get an empty ranking and a warning; one class is degenerate") {
  const auto c = from_rows({{"x y", 0}, {"y z", 1}, {"x", 0}}, {"a", "b", "c"});
  const auto e = fit_explanation(c);
  CHECK(e.ranked[2].empty());
  CHECK_FALSE(e.warnings.empty());
  CHECK_THROWS_AS(fit_explanation(from_rows({{"x", 0}, {"y", 0}}, {"a", "b"})), Error);
  CHECK_THROWS_AS(fit_explanation(LabeledCorpus{}), Error);
}

TEST_CASE("CSV and JSON exports") {
  const auto e = fit_explanation(from_rows({{"good good", 0}, {"bad bad", 1}, {"good", 0}, {"bad", 1}}, {"A", "B"}));
  const auto csv = e.to_csv();
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "class,token,weight,rank");
  std::getline(is, line);
  CHECK(line.rfind("A,good,", 0) == 0);
  CHECK(line.substr(line.rfind(',')) == ",1");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows + 1 == e.ranked[0].size() + e.ranked[1].size());

  const auto back = Explanation::from_json(e.to_json());
  CHECK(back.ranked == e.ranked);
  CHECK(back.class_names == e.class_names);
  CHECK(back.metadata == e.metadata);
  CHECK(back.to_csv() == csv);
  CHECK_THROWS_AS(Explanation::from_json("{\"format\": \"other\"}"), Error);
}

TEST_CASE("JSONL samples round-trip") {
  std::vector<GeneratedSample> s{{"hello world", "pos", 0.75, 12345678901234ULL, "ab12"},
                                 {"quote \" and \\ slash", "neg", 1e-17, 0, ""}};
  const auto text = samples_to_jsonl(s);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  const auto back = samples_from_jsonl(text);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].text == s[i].text);
    CHECK(back[i].cls == s[i].cls);
    CHECK(back[i].final_score == s[i].final_score);
    CHECK(back[i].seed == s[i].seed);
    CHECK(back[i].config_hash == s[i].config_hash);
  }
  const auto g = corpus_from_samples(back, {"pos", "neg"});
  CHECK(g.corpus.documents[1].label == std::optional<std::size_t>(1));
  CHECK_THROWS_AS(corpus_from_samples(back, {"pos"}), Error);
  CHECK_THROWS_AS(samples_from_jsonl("not json\n"), Error);
}

TEST_CASE("parallel_for visits every index once and rethrows failures") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw Error("boom", "boom");
                  }),
                  Error);
  CHECK(parse_mode("baseline") == Mode::baseline);
  CHECK_THROWS_AS(parse_mode("lime"), Error);
}
