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
#include <string_view>
#include <vector>

#include "coop/explainer.hpp"
#include "coop/glassbox.hpp"
#include "coop/mcts.hpp"

namespace coop::config {

struct CorpusSection {
  std::string path;
  std::int64_t min_count = 1;
};

struct LmSection {
  std::string backend = "ngram";  // ngram | bridge
  int order = 3;
  double smoothing_k = 0.1;
  std::string path;  // defaults to <output_dir>/lm.json
};

struct GlassboxSection {
  glassbox::LogRegParams params;
  std::int64_t min_count = 1;
  double top_threshold = 1.0;
  std::string path;  // defaults to <output_dir>/glassbox.json
};

struct ExplainerSection {
  int texts_per_class = 200;
  std::string mode = "therapy";
  int workers = 1;
};

struct EvalSection {
  std::string explanation;  // defaults to <output_dir>/explanation.json
  std::string texts;        // defaults to corpus.path
  std::vector<std::size_t> ks{10, 20, 50, 100, 250, 500, 1000, 1500};
  std::size_t top_k = 250;
  std::size_t max_texts = 1000;
  std::vector<std::size_t> sweep_sizes{50, 200, 1000};
  std::vector<std::uint64_t> sweep_seeds{0, 1, 2};
};

/// Whole-run configuration. JSON sections mirror the structs above; unknown
/// keys and type mismatches are rejected with Error("invalid_config").
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  CorpusSection corpus;
  LmSection lm;
  GlassboxSection glassbox;
  mcts::MctsConfig mcts;
  ExplainerSection explainer;
  EvalSection eval;

  std::string to_json() const;
  /// Defaults overlaid with `json`.
  static RunConfig from_json(std::string_view json);
  /// Throws Error("config_not_found") when the file is missing.
  static RunConfig load(const std::string& path);

  /// Sets a dotted path such as "mcts.c_puct" from its textual value (parsed
  /// as JSON, else taken as a string).
  void set(std::string_view dotted_path, std::string_view value);

  void validate() const;

  /// Stable rendering of everything that affects artifacts (output_dir and
  /// worker count excluded).
  std::string canonical() const;
  /// hex64 of FNV-1a over canonical().
  std::string hash() const;

  std::string lm_path() const;
  std::string glassbox_path() const;
  std::string explanation_path() const;
  std::string texts_path() const;
  std::string output(std::string_view name) const;

  explainer::ExplainerConfig explainer_config() const;
};

}  // namespace coop::config
