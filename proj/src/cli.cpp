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

#include "coop/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "coop/corpus.hpp"
#include "coop/evaluation.hpp"
#include "coop/explainer.hpp"
#include "coop/glassbox.hpp"
#include "coop/lm_bridge.hpp"
#include "coop/ngram_lm.hpp"
#include "coop/run_config.hpp"
#include "json.hpp"

namespace coop::cli {

namespace {

namespace fs = std::filesystem;
using config::RunConfig;

struct Options {
  std::string config_path;
  int workers = 0;
  bool force = false;
};

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io_error", "cannot write " + path);
  out << content;
  if (!out) throw Error("io_error", "write failed for " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("file_not_found", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_run_log(const RunConfig& cfg, const std::string& command, const std::string& status) {
  fs::create_directories(cfg.output_dir);
  std::ofstream log(cfg.output("run.log"), std::ios::app);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  log << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << " " << command << " config=" << cfg.hash()
      << " " << status << "\n";
}

std::unique_ptr<lm::LanguageModel> load_lm(const RunConfig& cfg) {
  if (cfg.lm.backend == "bridge") {
    const char* endpoint = std::getenv("COOP_EXPLAIN_BRIDGE");
    if (!endpoint || !*endpoint) {
      throw Error("bridge_unavailable", "lm.backend is 'bridge' but COOP_EXPLAIN_BRIDGE is not set");
    }
    return lm::LmBridgeClient::connect(endpoint);
  }
  return std::make_unique<lm::NGramLM>(lm::NGramLM::load(cfg.lm_path()));
}

corpus::LabeledCorpus load_training_corpus(const RunConfig& cfg) {
  if (cfg.corpus.path.empty()) throw Error("invalid_config", "corpus.path is required");
  return corpus::load_corpus(cfg.corpus.path);
}

std::string glassbox_corpus_hash(const glassbox::GlassBox& gb) {
  const auto it = gb.metadata.find("corpus_hash");
  return it == gb.metadata.end() ? std::string() : it->second;
}

void print_rule(std::ostream& out) { out << std::string(60, '-') << "\n"; }

// ---------------------------------------------------------------------------
// commands

int cmd_train_lm(const RunConfig& cfg, const Options&, std::ostream& out) {
  if (cfg.lm.backend != "ngram") {
    throw Error("invalid_config", "train-lm needs lm.backend = 'ngram'");
  }
  const auto corpus = load_training_corpus(cfg);
  const auto model = lm::NGramLM::fit(corpus, cfg.lm.order, cfg.lm.smoothing_k, cfg.corpus.min_count);
  auto j = nlohmann::ordered_json::parse(model.to_json());
  j["metadata"] = {{"config_hash", cfg.hash()}, {"corpus_hash", hex64(corpus::corpus_hash(corpus))}};
  write_file(cfg.lm_path(), j.dump(1));

  out << "train-lm\n";
  print_rule(out);
  out << std::left << std::setw(16) << "documents" << corpus.documents.size() << "\n"
      << std::setw(16) << "vocabulary" << model.vocab_size() << "\n"
      << std::setw(16) << "order" << model.order() << "\n"
      << std::setw(16) << "contexts" << model.num_contexts() << "\n"
      << std::setw(16) << "written" << cfg.lm_path() << "\n";
  return 0;
}

int cmd_train_glassbox(const RunConfig& cfg, const Options&, std::ostream& out) {
  const auto corpus = load_training_corpus(cfg);
  auto gb = glassbox::GlassBox::train(corpus, cfg.glassbox.params, cfg.glassbox.min_count);
  gb.metadata["corpus_hash"] = hex64(corpus::corpus_hash(corpus));
  gb.metadata["config_hash"] = cfg.hash();
  write_file(cfg.glassbox_path(), gb.to_json());
  write_file(cfg.output("glassbox_weights.csv"), gb.importance_csv());

  out << "train-glassbox\n";
  print_rule(out);
  out << std::left << std::setw(16) << "documents" << corpus.documents.size() << "\n"
      << std::setw(16) << "features" << gb.vectorizer().num_features() << "\n"
      << std::setw(16) << "iterations" << gb.model().trained_iterations << "\n"
      << std::setw(16) << "train accuracy" << std::fixed << std::setprecision(4)
      << gb.accuracy(corpus) << "\n";
  out << std::setw(16) << "class" << "top words (weight > " << cfg.glassbox.top_threshold << ")\n";
  for (ClassId c = 0; c < gb.num_classes(); ++c) {
    out << std::setw(16) << gb.class_names()[c]
        << gb.top_words(c, cfg.glassbox.top_threshold).size() << "\n";
  }
  out << std::setw(16) << "written" << cfg.glassbox_path() << "\n";
  return 0;
}

void print_generation_summary(const explainer::GeneratedCorpus& g, std::ostream& out) {
  const auto counts = g.corpus.class_counts();
  std::vector<double> score(counts.size(), 0.0);
  for (std::size_t i = 0; i < g.samples.size(); ++i) {
    score[*g.corpus.documents[i].label] += g.samples[i].final_score;
  }
  out << std::left << std::setw(16) << "class" << std::setw(10) << "texts" << "mean score\n";
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out << std::setw(16) << g.corpus.class_names[c] << std::setw(10) << counts[c] << std::fixed
        << std::setprecision(4) << (counts[c] ? score[c] / static_cast<double>(counts[c]) : 0.0)
        << "\n";
  }
  for (const auto& w : g.warnings) out << "warning: " << w << "\n";
}

int cmd_generate(const RunConfig& cfg, const Options&, std::ostream& out) {
  const auto lm = load_lm(cfg);
  const auto gb = glassbox::GlassBox::load(cfg.glassbox_path());
  const auto ec = cfg.explainer_config();
  explainer::GeneratedCorpus all;
  if (ec.mode == explainer::Mode::therapy) {
    all.corpus.class_names = gb.class_names();
    for (ClassId c = 0; c < gb.num_classes(); ++c) {
      auto g = explainer::generate_class_corpus(*lm, gb, gb.class_names(), c, ec.texts_per_class, ec);
      for (auto& d : g.corpus.documents) all.corpus.documents.push_back(std::move(d));
      for (auto& s : g.samples) all.samples.push_back(std::move(s));
    }
  } else {
    all = explainer::generate_baseline_corpus(
        *lm, gb, gb.class_names(), ec.texts_per_class * static_cast<int>(gb.num_classes()), ec);
  }
  write_file(cfg.output("generated.jsonl"), explainer::samples_to_jsonl(all.samples));

  out << "generate (" << cfg.explainer.mode << ")\n";
  print_rule(out);
  print_generation_summary(all, out);
  out << "written " << cfg.output("generated.jsonl") << "\n";
  return 0;
}

int cmd_explain(const RunConfig& cfg, const Options&, std::ostream& out) {
  const auto lm = load_lm(cfg);
  const auto gb = glassbox::GlassBox::load(cfg.glassbox_path());
  auto result = explainer::explain(*lm, gb, gb.class_names(), cfg.explainer_config());
  result.explanation.metadata["glassbox_corpus_hash"] = glassbox_corpus_hash(gb);
  result.explanation.metadata["generated_corpus"] = "generated.jsonl";
  result.explanation.metadata["lm_backend"] = cfg.lm.backend;

  write_file(cfg.output("generated.jsonl"), explainer::samples_to_jsonl(result.generated.samples));
  write_file(cfg.output("explanation.csv"), result.explanation.to_csv());
  write_file(cfg.output("explanation.json"), result.explanation.to_json());

  out << "explain (" << cfg.explainer.mode << ")\n";
  print_rule(out);
  print_generation_summary(result.generated, out);
  print_rule(out);
  for (std::size_t c = 0; c < result.explanation.class_names.size(); ++c) {
    out << std::left << std::setw(16) << result.explanation.class_names[c];
    const auto& words = result.explanation.ranked[c];
    for (std::size_t i = 0; i < words.size() && i < 5; ++i) out << words[i].first << " ";
    out << "\n";
  }
  for (const auto& w : result.explanation.warnings) out << "warning: " << w << "\n";
  out << "written " << cfg.output("explanation.csv") << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const Options& opts, std::ostream& out) {
  const auto gb = glassbox::GlassBox::load(cfg.glassbox_path());
  const auto path = cfg.explanation_path();
  eval::ImportanceMap expl;
  std::string expl_corpus_hash;
  if (fs::path(path).extension() == ".json") {
    const auto e = explainer::Explanation::from_json(read_file(path));
    const auto it = e.metadata.find("glassbox_corpus_hash");
    if (it != e.metadata.end()) expl_corpus_hash = it->second;
    expl = eval::ImportanceMap::from_explanation(e);
  } else {
    expl = eval::ImportanceMap::load_csv(path);
  }
  const auto gb_hash = glassbox_corpus_hash(gb);
  if (!expl_corpus_hash.empty() && expl_corpus_hash != gb_hash && !opts.force) {
    throw Error("corpus_mismatch", "explanation was built against corpus " + expl_corpus_hash +
                                       " but the glass-box was trained on " + gb_hash +
                                       " (use --force to override)");
  }

  std::vector<corpus::Document> texts;
  if (!cfg.texts_path().empty()) {
    const auto corpus = corpus::load_corpus(cfg.texts_path());
    const auto texts_hash = hex64(corpus::corpus_hash(corpus));
    if (cfg.eval.texts.empty() && texts_hash != gb_hash && !gb_hash.empty() && !opts.force) {
      throw Error("corpus_mismatch", "evaluation texts " + texts_hash +
                                         " differ from the glass-box training corpus " + gb_hash +
                                         " (use --force to override)");
    }
    texts = corpus.documents;
  }

  eval::EvalOptions eo;
  eo.threshold = cfg.glassbox.top_threshold;
  eo.ks = cfg.eval.ks;
  eo.top_k = cfg.eval.top_k;
  eo.max_texts = cfg.eval.max_texts;
  auto report = eval::evaluate(expl, gb, texts, eo);
  report.metadata["config_hash"] = cfg.hash();
  report.metadata["glassbox_corpus_hash"] = gb_hash;
  report.metadata["explanation"] = fs::path(path).filename().string();

  write_file(cfg.output("report.json"), report.to_json());
  write_file(cfg.output("pr_curve.csv"), report.pr_csv());
  write_file(cfg.output("flip_curve.csv"), report.flip_csv());

  out << "evaluate (" << expl.source << ")\n";
  print_rule(out);
  out << std::left << std::setw(16) << "class" << std::setw(10) << "rho" << std::setw(12) << "p"
      << "top words\n";
  for (const auto& c : report.classes) {
    out << std::setw(16) << c.cls << std::setw(10) << std::fixed << std::setprecision(4)
        << c.spearman.rho << std::setw(12) << std::scientific << std::setprecision(3)
        << c.spearman.p << c.reference_size << "\n";
  }
  out << std::setw(16) << "mean" << std::fixed << std::setprecision(4) << report.mean_rho << "\n";
  print_rule(out);
  out << "flip rate over " << report.flips.num_texts << " texts:";
  for (std::size_t r : {1, 2, 5, 10}) {
    out << "  r=" << r << " " << std::setprecision(3) << report.flips.rate_at(r);
  }
  out << "\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  out << "written " << cfg.output("report.json") << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const Options&, std::ostream& out) {
  const auto lm = load_lm(cfg);
  const auto gb = glassbox::GlassBox::load(cfg.glassbox_path());
  const auto points = eval::sweep_num_texts(*lm, gb, cfg.eval.sweep_sizes, cfg.explainer_config(),
                                            cfg.eval.sweep_seeds, cfg.glassbox.top_threshold);
  nlohmann::ordered_json j;
  j["format"] = "coop-sweep";
  j["config_hash"] = cfg.hash();
  j["glassbox_corpus_hash"] = glassbox_corpus_hash(gb);
  j["seeds"] = cfg.eval.sweep_seeds;
  auto& arr = j["points"] = nlohmann::ordered_json::array();
  for (const auto& pt : points) {
    arr.push_back({{"size", pt.size},
                   {"mean_rho", pt.mean_rho},
                   {"mean_p", pt.mean_p},
                   {"per_seed_rho", pt.per_seed_rho}});
  }
  write_file(cfg.output("sweep.json"), j.dump(1));
  write_file(cfg.output("sweep.csv"), eval::sweep_csv(points));

  out << "sweep\n";
  print_rule(out);
  out << std::left << std::setw(12) << "texts" << "mean rho\n";
  for (const auto& pt : points) {
    out << std::setw(12) << pt.size << std::fixed << std::setprecision(4) << pt.mean_rho << "\n";
  }
  return 0;
}

int cmd_dump_samples(const RunConfig& cfg, const Options&, std::ostream& out) {
  const auto e = explainer::Explanation::from_json(read_file(cfg.explanation_path()));
  const auto samples = explainer::samples_from_jsonl(read_file(cfg.output("generated.jsonl")));
  std::ostringstream os;
  for (std::size_t c = 0; c < e.class_names.size(); ++c) {
    os << "== " << e.class_names[c] << "\n";
    os << "top words:";
    for (std::size_t i = 0; i < e.ranked[c].size() && i < 20; ++i) os << " " << e.ranked[c][i].first;
    os << "\n";
    int shown = 0;
    for (const auto& s : samples) {
      if (s.cls != e.class_names[c]) continue;
      os << "sample: " << s.text << "\n";
      if (++shown == 2) break;
    }
  }
  write_file(cfg.output("samples.txt"), os.str());
  out << os.str();
  return 0;
}

// Dotted-path overrides left over after CLI11: `--a.b=v` or `--a.b v`.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) {
      throw Error("usage_error", "unexpected argument '" + arg + "'");
    }
    const auto body = arg.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      cfg.set(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      cfg.set(body, extras[++i]);
    } else {
      throw Error("usage_error", "override '" + arg + "' needs a value");
    }
  }
}

bool is_config_error(const std::string& code) {
  return code == "invalid_config" || code == "config_not_found" || code == "usage_error";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Global explanations of text classifiers via classifier-guided generation",
               "coop-explain"};
  app.require_subcommand(1, 1);

  Options opts;
  using Handler = int (*)(const RunConfig&, const Options&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"train-lm", "Fit the n-gram language model on corpus.path", cmd_train_lm},
      {"train-glassbox", "Train the tf-idf logistic-regression glass-box", cmd_train_glassbox},
      {"generate", "Generate class-guided (or unguided) texts", cmd_generate},
      {"explain", "Generate texts and fit the explanation", cmd_explain},
      {"evaluate", "Score an explanation against the glass-box", cmd_evaluate},
      {"sweep", "Spearman against the number of generated texts per class", cmd_sweep},
      {"dump-samples", "Top words and sample texts per class", cmd_dump_samples},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", opts.config_path, "Run configuration (JSON)")->required();
    sub->add_option("--workers", opts.workers, "Parallel generations")->check(CLI::PositiveNumber);
    sub->add_flag("--force", opts.force, "Allow artifacts with mismatched corpus hashes");
    sub->allow_extras();
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage_error: " << e.what() << "\n";
    return 2;
  }

  std::size_t which = 0;
  while (which < subs.size() && !subs[which]->parsed()) ++which;
  const auto& [name, help, handler] = commands[which];

  RunConfig cfg;
  try {
    cfg = RunConfig::load(opts.config_path);
    apply_overrides(cfg, subs[which]->remaining());
    if (opts.workers > 0) cfg.explainer.workers = opts.workers;
    cfg.validate();
  } catch (const Error& e) {
    err << e.code() << ": " << e.what() << "\n";
    return 2;
  }

  try {
    const int rc = handler(cfg, opts, out);
    append_run_log(cfg, name, "ok");
    return rc;
  } catch (const Error& e) {
    err << e.code() << ": " << e.what() << "\n";
    try {
      append_run_log(cfg, name, "failed " + e.code());
    } catch (...) {
    }
    return is_config_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "internal_error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace coop::cli
