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

// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "coop/evaluation.hpp"
#include "coop/explainer.hpp"
#include "coop/glassbox.hpp"
#include "coop/mcts.hpp"
#include "coop/ngram_lm.hpp"
#include "coop/synthetic.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "toy_models.hpp"

using namespace coop;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kMinGlassboxAccuracy = 0.95;
constexpr int kMinKeywordsInTop20 = 3;
constexpr double kMinMeanRho = 0.3;
constexpr double kMaxMeanP = 0.05;
constexpr int kMinTherapyWins = 2;
constexpr double kSweepSlack = 0.05;
constexpr double kOptimalityTol = 1e-9;
constexpr double kGradientTol = 1e-5;
constexpr double kTfidfTol = 1e-12;
constexpr double kSpearmanTol = 1e-12;
constexpr double kMinFlipAtOne = 0.8;

// Fixture parameters.
constexpr int kLmOrder = 3;
constexpr double kLmSmoothing = 0.1;
constexpr int kTextsPerClass = 200;
constexpr int kPlayouts = 50;
constexpr double kCPuct = 20.0;
constexpr double kOverlap = 0.3;
const std::vector<std::uint64_t> kSeeds{0, 1, 2};

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Fixture {
  synthetic::PlantedConfig planted;
  corpus::LabeledCorpus corpus;
  lm::NGramLM lm;
  glassbox::GlassBox gb;

  explicit Fixture(double overlap)
      : planted(make_planted(overlap)),
        corpus(synthetic::make_planted_corpus(planted)),
        lm(lm::NGramLM::fit(corpus, kLmOrder, kLmSmoothing)),
        gb(glassbox::GlassBox::train(corpus)) {}

  static synthetic::PlantedConfig make_planted(double overlap) {
    synthetic::PlantedConfig p;
    p.overlap = overlap;
    return p;
  }

  explainer::ExplainerConfig config(std::uint64_t seed, explainer::Mode mode = explainer::Mode::therapy,
                                    mcts::TokenChoice choice = mcts::TokenChoice::highest_score) const {
    explainer::ExplainerConfig c;
    c.texts_per_class = kTextsPerClass;
    c.mcts.playouts_per_token = kPlayouts;
    c.mcts.c_puct = kCPuct;
    c.mcts.token_choice = choice;
    c.mode = mode;
    c.seed = seed;
    return c;
  }

  eval::Correlation rho_of(const explainer::Explanation& e) const {
    return eval::mean_spearman(eval::ImportanceMap::from_explanation(e), gb, 1.0);
  }
};

explainer::Explanation planted_recovery(const Fixture& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const double acc = f.gb.accuracy(f.corpus);
  const auto keywords = synthetic::planted_keywords(f.planted);
  int worst = 1 << 30;
  double rho = 0, p = 0;
  explainer::Explanation first;
  for (auto seed : kSeeds) {
    const auto r = explainer::explain(f.lm, f.gb, f.corpus.class_names, f.config(seed));
    for (std::size_t c = 0; c < keywords.size(); ++c) {
      std::set<std::string> top;
      const auto& ranked = r.explanation.ranked[c];
      for (std::size_t i = 0; i < ranked.size() && i < 20; ++i) top.insert(ranked[i].first);
      int hits = 0;
      for (const auto& k : keywords[c]) hits += static_cast<int>(top.count(k));
      worst = std::min(worst, hits);
    }
    const auto corr = f.rho_of(r.explanation);
    rho += corr.rho;
    p += corr.p;
    if (seed == kSeeds.front()) first = r.explanation;
  }
  rho /= static_cast<double>(kSeeds.size());
  p /= static_cast<double>(kSeeds.size());
  const bool pass = acc >= kMinGlassboxAccuracy && worst >= kMinKeywordsInTop20 && rho >= kMinMeanRho &&
                    p < kMaxMeanP;
  report("planted-keyword recovery", pass,
         "glass-box accuracy " + fmt(acc) + ", fewest planted keywords in a class top-20 " +
             std::to_string(worst) + "/5, mean rho " + fmt(rho) + ", mean p " + fmt(p, 6) + ", " +
             fmt(seconds_since(t0), 1) + " s");
  return first;
}

void guidance_ablation() {
  const auto t0 = std::chrono::steady_clock::now();
  const Fixture f(kOverlap);
  int wins = 0;
  double best = 0, played = 0;
  std::string per_seed;
  for (auto seed : kSeeds) {
    const auto therapy = f.rho_of(explainer::explain(f.lm, f.gb, f.corpus.class_names, f.config(seed)).explanation);
    const auto baseline = f.rho_of(
        explainer::explain(f.lm, f.gb, f.corpus.class_names, f.config(seed, explainer::Mode::baseline)).explanation);
    const auto most = f.rho_of(explainer::explain(f.lm, f.gb, f.corpus.class_names,
                                                  f.config(seed, explainer::Mode::therapy,
                                                           mcts::TokenChoice::most_played))
                                   .explanation);
    wins += therapy.rho >= baseline.rho;
    best += therapy.rho;
    played += most.rho;
    per_seed += " " + fmt(therapy.rho, 3) + "/" + fmt(baseline.rho, 3);
  }
  best /= static_cast<double>(kSeeds.size());
  played /= static_cast<double>(kSeeds.size());
  report("guidance ablation", wins >= kMinTherapyWins && best >= played,
         "therapy/baseline rho per seed" + per_seed + " (" + std::to_string(wins) +
             "/3 therapy wins), highest_score " + fmt(best) + " vs most_played " + fmt(played) + ", " +
             fmt(seconds_since(t0), 1) + " s");
}

void sample_sweep(const Fixture& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> sizes{50, 1000, 2000};
  const auto pts = eval::sweep_num_texts(f.lm, f.gb, sizes, f.config(0), kSeeds, 1.0);
  const double r50 = pts[0].mean_rho, r1000 = pts[1].mean_rho, r2000 = pts[2].mean_rho;
  report("sample-count sweep", r1000 >= r50 - kSweepSlack && std::abs(r1000 - r2000) <= kSweepSlack,
         "mean rho at 50/1000/2000 texts per class: " + fmt(r50) + " / " + fmt(r1000) + " / " + fmt(r2000) +
             ", " + fmt(seconds_since(t0), 1) + " s");
}

void mcts_optimality() {
  const std::vector<std::string> names{"a", "b", "</s>"};
  int exact = 0;
  double worst = 0;
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    const toy::ToyLM lm(names, [inst](std::span<const TokenId> ctx) {
      std::uint64_t h = splitmix64(1000 + inst);
      for (TokenId t : ctx) h = splitmix64(h ^ static_cast<std::uint64_t>(t + 1));
      std::vector<double> d(3);
      for (std::size_t i = 0; i < 3; ++i) {
        h = splitmix64(h + i);
        d[i] = 0.1 + 0.9 * static_cast<double>(h >> 11) * 0x1.0p-53;
      }
      return d;
    });
    const toy::FnScorer scorer([inst](std::string_view text) {
      return static_cast<double>(splitmix64(fnv1a(text) ^ (0x5eed + inst)) >> 11) * 0x1.0p-53;
    });
    double best = -1;
    for (const auto& s : toy::enumerate_sequences(lm, 3)) best = std::max(best, scorer.score(lm.detokenize(s))[0]);
    mcts::MctsConfig cfg;
    cfg.aggregation = mcts::Aggregation::max;
    cfg.max_length = 3;
    cfg.rollout_max_tokens = 3;
    cfg.playouts_per_token = 200;
    cfg.rng_seed = inst;
    const auto r = mcts::generate(lm, scorer, 0, {}, cfg);
    const double gap = std::abs(r.final_score - best);
    worst = std::max(worst, gap);
    exact += gap <= kOptimalityTol;
  }
  report("MCTS optimality oracle", exact == 20,
         std::to_string(exact) + "/20 instances at the enumerated optimum, largest gap " + fmt(worst, 12));
}

void numerical_kernels() {
  // Gradient against central differences of the dense loss.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1, 1);
  double grad_err = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t N = 6 + inst % 5, F = 4 + inst % 3, K = 2 + inst % 3;
    std::vector<std::vector<double>> dense(N, std::vector<double>(F));
    std::vector<glassbox::SparseVector> X(N);
    std::vector<std::size_t> y(N);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t f = 0; f < F; ++f) {
        if (rng() % 3) {
          dense[i][f] = u(rng);
          X[i].index.push_back(static_cast<std::uint32_t>(f));
          X[i].value.push_back(dense[i][f]);
        }
      }
      y[i] = i % K;
    }
    glassbox::LogRegModel m;
    m.num_classes = K;
    m.num_features = F;
    m.W.resize(K * F);
    m.b.resize(K);
    for (auto& w : m.W) w = u(rng);
    for (auto& b : m.b) b = u(rng);
    const double lambda = inst % 2 ? 0.05 : 1e-3;
    std::vector<double> gw(m.W.size()), gb(m.b.size());
    glassbox::logreg_gradient(m, X, y, lambda, gw, gb);
    const double h = 1e-5;
    for (std::size_t j = 0; j < m.W.size(); ++j) {
      auto p = m.W, q = m.W;
      p[j] += h;
      q[j] -= h;
      const double fd = (oracle::dense_loss(dense, y, p, m.b, K, lambda) - oracle::dense_loss(dense, y, q, m.b, K, lambda)) / (2 * h);
      grad_err = std::max(grad_err, std::abs(fd - gw[j]));
    }
    for (std::size_t k = 0; k < K; ++k) {
      auto p = m.b, q = m.b;
      p[k] += h;
      q[k] -= h;
      const double fd = (oracle::dense_loss(dense, y, m.W, p, K, lambda) - oracle::dense_loss(dense, y, m.W, q, K, lambda)) / (2 * h);
      grad_err = std::max(grad_err, std::abs(fd - gb[k]));
    }
  }

  // tf-idf fixtures computed by hand.
  double tfidf_err = 0;
  {
    corpus::LabeledCorpus c;
    c.class_names = {"x", "y"};
    c.documents = {corpus::Document::from_text("a b", 0), corpus::Document::from_text("a", 1)};
    const auto v = glassbox::TfIdfVectorizer::fit(c);
    const double idf_a = 1.0, idf_b = std::log(1.5) + 1.0;
    tfidf_err = std::max(tfidf_err, std::abs(v.idf()[static_cast<std::size_t>(v.feature_index("a"))] - idf_a));
    tfidf_err = std::max(tfidf_err, std::abs(v.idf()[static_cast<std::size_t>(v.feature_index("b"))] - idf_b));
    const std::vector<std::string> doc{"b", "a", "a"};
    const auto x = v.transform(doc);
    const double norm = std::sqrt(4.0 * idf_a * idf_a + idf_b * idf_b);
    for (std::size_t i = 0; i < x.nnz(); ++i) {
      const auto& tok = v.features()[x.index[i]];
      const double want = tok == "a" ? 2.0 * idf_a / norm : idf_b / norm;
      tfidf_err = std::max(tfidf_err, std::abs(x.value[i] - want));
    }
    const glassbox::TfIdfVectorizer eq({"a", "b"}, {1.0, 1.0});
    const auto aa = eq.transform(std::vector<std::string>{"a", "a"});
    tfidf_err = std::max(tfidf_err, std::abs(aa.value.at(0) - 1.0));
    const auto ab = eq.transform(std::vector<std::string>{"a", "b"});
    tfidf_err = std::max(tfidf_err, std::abs(ab.value.at(0) - 1.0 / std::sqrt(2.0)));
    tfidf_err = std::max(tfidf_err, std::abs(ab.value.at(1) - 1.0 / std::sqrt(2.0)));
    if (x.nnz() != 2 || aa.nnz() != 1) tfidf_err = INFINITY;
  }

  // Spearman against quadratic-time ranks and a direct Pearson.
  double rank_err = 0;
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> len(3, 30), small(0, 4);
  int compared = 0;
  while (compared < 100) {
    const int n = len(rng);
    const bool ties = compared % 3 == 0;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = ties ? small(rng) : g(rng);
      y[i] = ties ? small(rng) : 0.3 * x[i] + g(rng);
    }
    const auto rx = oracle::pairwise_ranks(x), ry = oracle::pairwise_ranks(y);
    if (std::all_of(rx.begin(), rx.end(), [&](double r) { return r == rx[0]; }) ||
        std::all_of(ry.begin(), ry.end(), [&](double r) { return r == ry[0]; })) {
      continue;
    }
    rank_err = std::max(rank_err, std::abs(eval::spearman(x, y).rho - oracle::pearson(rx, ry)));
    ++compared;
  }

  report("numerical kernels", grad_err <= kGradientTol && tfidf_err <= kTfidfTol && rank_err <= kSpearmanTol,
         "max gradient error " + fmt(grad_err, 12) + " over 20 instances, tf-idf error " + fmt(tfidf_err, 17) +
             ", Spearman error " + fmt(rank_err, 17) + " over 100 vectors");
}

void insertion_deletion(const Fixture& f, const explainer::Explanation& e) {
  const auto expl = eval::ImportanceMap::from_explanation(e);
  const auto single = synthetic::make_single_keyword_texts(f.planted, 1000, 11);
  const std::vector<corpus::Document> planted(f.corpus.documents.begin(), f.corpus.documents.begin() + 1000);

  bool replay_ok = true, monotone = true;
  double at_one = 0;
  for (const auto* texts : {&single.documents, &planted}) {
    const auto curve = eval::insertion_deletion(f.gb, *texts, expl, 250, 1000);
    for (std::size_t i = 0; i < curve.num_texts; ++i) {
      replay_ok = replay_ok && curve.flipped_at[i] == oracle::replay_flip(f.gb, f.gb.class_names(), (*texts)[i], expl, 250);
    }
    for (std::size_t r = 0; r + 1 < curve.flip_rate.size(); ++r) {
      monotone = monotone && curve.flip_rate[r] <= curve.flip_rate[r + 1];
    }
    if (texts == &single.documents) at_one = curve.rate_at(1);
  }
  report("insertion/deletion", at_one >= kMinFlipAtOne && replay_ok && monotone,
         "flip rate at r=1 on single-keyword texts " + fmt(at_one) + ", replay " +
             (replay_ok ? "matches" : "differs") + ", curves " + (monotone ? "monotone" : "not monotone"));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void cli_determinism(const Fixture& f) {
  const auto dir = fs::temp_directory_path() / "coop_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  corpus::save_corpus(f.corpus, (dir / "corpus.jsonl").string());
  const nlohmann::json cfg = {
      {"seed", 5},
      {"output_dir", (dir / "a").string()},
      {"corpus", {{"path", (dir / "corpus.jsonl").string()}}},
      {"lm", {{"path", (dir / "lm.json").string()}}},
      {"glassbox", {{"path", (dir / "glassbox.json").string()}}},
      {"mcts", {{"c_puct", kCPuct}, {"playouts_per_token", kPlayouts}}},
      {"explainer", {{"texts_per_class", 50}}},
  };
  std::ofstream(dir / "config.json") << cfg.dump(2);
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(COOP_EXPLAIN_BIN) + " " + args + " --config " +
                            (dir / "config.json").string() + " >/dev/null 2>>" + (dir / "stderr.txt").string();
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  const bool ran = run("train-lm") == 0 && run("train-glassbox") == 0 && run("explain") == 0 &&
                   run("explain --output_dir=" + (dir / "b").string()) == 0;
  const auto a = slurp(dir / "a" / "explanation.csv");
  const auto b = slurp(dir / "b" / "explanation.csv");
  const bool same = ran && !a.empty() && a == b;
  report("determinism", same,
         ran ? (same ? "two explain runs wrote byte-identical explanation CSVs (" + std::to_string(a.size()) + " bytes)"
                     : "explanation CSVs differ")
             : "a CLI step failed: " + slurp(dir / "stderr.txt"));
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Fixture planted(0.0);
    const auto explanation = planted_recovery(planted);
    guidance_ablation();
    sample_sweep(planted);
    mcts_optimality();
    numerical_kernels();
    insertion_deletion(planted, explanation);
    cli_determinism(planted);
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << failures << " failed, total " << fmt(seconds_since(t0), 1) << " s" << std::endl;
  return failures;
}
