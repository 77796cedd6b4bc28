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

#include "coop/run_config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace coop::config {

using Json = nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error("invalid_config", msg); }

bool is_integral(const Json& j) { return j.is_number_integer() || j.is_number_unsigned(); }

// Overlays `patch` onto `base`, rejecting keys `base` lacks and values whose
// JSON type does not match the default's.
void overlay(Json& base, const Json& patch, const std::string& prefix) {
  if (!patch.is_object()) invalid("'" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) invalid("unknown key '" + path + "'");
    Json& slot = base[it.key()];
    const Json& v = it.value();
    if (slot.is_object()) {
      overlay(slot, v, path);
    } else if (slot.is_string()) {
      if (!v.is_string()) invalid("'" + path + "' must be a string");
      slot = v;
    } else if (slot.is_boolean()) {
      if (!v.is_boolean()) invalid("'" + path + "' must be a boolean");
      slot = v;
    } else if (slot.is_array()) {
      if (!v.is_array()) invalid("'" + path + "' must be an array");
      slot = v;
    } else if (is_integral(slot)) {
      const bool was_unsigned = slot.is_number_unsigned();
      if (!v.is_number()) invalid("'" + path + "' must be an integer");
      if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d != std::floor(d) || !std::isfinite(d)) invalid("'" + path + "' must be an integer");
        slot = static_cast<std::int64_t>(d);
      } else {
        slot = v;
      }
      if (was_unsigned && slot.is_number_integer() && slot.get<std::int64_t>() < 0) {
        invalid("'" + path + "' must be non-negative");
      }
    } else if (slot.is_number_float()) {
      if (!v.is_number()) invalid("'" + path + "' must be a number");
      slot = v.get<double>();
    } else {
      slot = v;
    }
  }
}

template <class T>
T field(const Json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    invalid(std::string("bad value for '") + section + "." + key + "'");
  }
}

Json defaults_tree() { return Json::parse(RunConfig{}.to_json()); }

RunConfig from_tree(const Json& j) {
  RunConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    invalid("bad value for 'seed' or 'output_dir'");
  }
  c.corpus.path = field<std::string>(j, "corpus", "path");
  c.corpus.min_count = field<std::int64_t>(j, "corpus", "min_count");

  c.lm.backend = field<std::string>(j, "lm", "backend");
  c.lm.order = field<int>(j, "lm", "order");
  c.lm.smoothing_k = field<double>(j, "lm", "smoothing_k");
  c.lm.path = field<std::string>(j, "lm", "path");

  c.glassbox.params.l2_lambda = field<double>(j, "glassbox", "l2_lambda");
  c.glassbox.params.max_iters = field<int>(j, "glassbox", "max_iters");
  c.glassbox.params.lr = field<double>(j, "glassbox", "lr");
  c.glassbox.params.tol = field<double>(j, "glassbox", "tol");
  c.glassbox.min_count = field<std::int64_t>(j, "glassbox", "min_count");
  c.glassbox.top_threshold = field<double>(j, "glassbox", "top_threshold");
  c.glassbox.path = field<std::string>(j, "glassbox", "path");

  c.mcts.c_puct = field<double>(j, "mcts", "c_puct");
  c.mcts.playouts_per_token = field<int>(j, "mcts", "playouts_per_token");
  c.mcts.max_length = field<int>(j, "mcts", "max_length");
  c.mcts.rollout_max_tokens = field<int>(j, "mcts", "rollout_max_tokens");
  c.mcts.aggregation = mcts::parse_aggregation(field<std::string>(j, "mcts", "aggregation"));
  c.mcts.token_choice = mcts::parse_token_choice(field<std::string>(j, "mcts", "token_choice"));
  c.mcts.rollout_temperature = field<double>(j, "mcts", "rollout_temperature");
  c.mcts.top_p = field<double>(j, "mcts", "top_p");

  c.explainer.texts_per_class = field<int>(j, "explainer", "texts_per_class");
  c.explainer.mode = field<std::string>(j, "explainer", "mode");
  c.explainer.workers = field<int>(j, "explainer", "workers");

  c.eval.explanation = field<std::string>(j, "eval", "explanation");
  c.eval.texts = field<std::string>(j, "eval", "texts");
  c.eval.ks = field<std::vector<std::size_t>>(j, "eval", "ks");
  c.eval.top_k = field<std::size_t>(j, "eval", "top_k");
  c.eval.max_texts = field<std::size_t>(j, "eval", "max_texts");
  c.eval.sweep_sizes = field<std::vector<std::size_t>>(j, "eval", "sweep_sizes");
  c.eval.sweep_seeds = field<std::vector<std::uint64_t>>(j, "eval", "sweep_seeds");
  c.validate();
  return c;
}

}  // namespace

std::string RunConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["corpus"] = {{"path", corpus.path}, {"min_count", corpus.min_count}};
  j["lm"] = {{"backend", lm.backend},
             {"order", lm.order},
             {"smoothing_k", lm.smoothing_k},
             {"path", lm.path}};
  j["glassbox"] = {{"l2_lambda", glassbox.params.l2_lambda},
                   {"max_iters", glassbox.params.max_iters},
                   {"lr", glassbox.params.lr},
                   {"tol", glassbox.params.tol},
                   {"min_count", glassbox.min_count},
                   {"top_threshold", glassbox.top_threshold},
                   {"path", glassbox.path}};
  j["mcts"] = {{"c_puct", mcts.c_puct},
               {"playouts_per_token", mcts.playouts_per_token},
               {"max_length", mcts.max_length},
               {"rollout_max_tokens", mcts.rollout_max_tokens},
               {"aggregation", std::string(mcts::to_string(mcts.aggregation))},
               {"token_choice", std::string(mcts::to_string(mcts.token_choice))},
               {"rollout_temperature", mcts.rollout_temperature},
               {"top_p", mcts.top_p}};
  j["explainer"] = {{"texts_per_class", explainer.texts_per_class},
                    {"mode", explainer.mode},
                    {"workers", explainer.workers}};
  j["eval"] = {{"explanation", eval.explanation}, {"texts", eval.texts},
               {"ks", eval.ks},                   {"top_k", eval.top_k},
               {"max_texts", eval.max_texts},     {"sweep_sizes", eval.sweep_sizes},
               {"sweep_seeds", eval.sweep_seeds}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(std::string_view text) {
  Json user;
  try {
    user = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    invalid(std::string("config is not valid JSON: ") + e.what());
  }
  Json tree = defaults_tree();
  overlay(tree, user, "");
  return from_tree(tree);
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("config_not_found", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void RunConfig::set(std::string_view dotted_path, std::string_view value) {
  Json v;
  try {
    v = Json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    v = std::string(value);
  }
  Json patch = Json::object();
  Json* cur = &patch;
  std::size_t pos = 0;
  for (;;) {
    const auto dot = dotted_path.find('.', pos);
    const std::string key(dotted_path.substr(pos, dot - pos));
    if (key.empty()) invalid("bad override path '" + std::string(dotted_path) + "'");
    if (dot == std::string_view::npos) {
      (*cur)[key] = v;
      break;
    }
    cur = &(*cur)[key];
    *cur = Json::object();
    pos = dot + 1;
  }
  Json tree = Json::parse(to_json());
  overlay(tree, patch, "");
  *this = from_tree(tree);
}

void RunConfig::validate() const {
  if (output_dir.empty()) invalid("output_dir must not be empty");
  if (corpus.min_count < 1) invalid("corpus.min_count must be >= 1");
  if (lm.backend != "ngram" && lm.backend != "bridge") invalid("lm.backend must be 'ngram' or 'bridge'");
  if (lm.order < 1) invalid("lm.order must be >= 1");
  if (!(lm.smoothing_k > 0.0)) invalid("lm.smoothing_k must be > 0");
  if (!(glassbox.params.l2_lambda >= 0.0)) invalid("glassbox.l2_lambda must be >= 0");
  if (glassbox.params.max_iters < 1) invalid("glassbox.max_iters must be >= 1");
  if (!(glassbox.params.lr > 0.0)) invalid("glassbox.lr must be > 0");
  if (!(glassbox.params.tol >= 0.0)) invalid("glassbox.tol must be >= 0");
  if (glassbox.min_count < 1) invalid("glassbox.min_count must be >= 1");
  if (!std::isfinite(glassbox.top_threshold)) invalid("glassbox.top_threshold must be finite");
  mcts.validate();
  if (explainer.texts_per_class < 1) invalid("explainer.texts_per_class must be >= 1");
  explainer::parse_mode(explainer.mode);
  if (explainer.workers < 1) invalid("explainer.workers must be >= 1");
  for (std::size_t i = 0; i < eval.ks.size(); ++i) {
    if (eval.ks[i] == 0 || (i > 0 && eval.ks[i] <= eval.ks[i - 1])) {
      invalid("eval.ks must be positive and ascending");
    }
  }
  if (eval.top_k < 1) invalid("eval.top_k must be >= 1");
  for (std::size_t i = 0; i < eval.sweep_sizes.size(); ++i) {
    if (eval.sweep_sizes[i] == 0 || (i > 0 && eval.sweep_sizes[i] < eval.sweep_sizes[i - 1])) {
      invalid("eval.sweep_sizes must be positive and ascending");
    }
  }
}

std::string RunConfig::canonical() const {
  auto j = Json::parse(to_json());
  j.erase("output_dir");
  j["explainer"].erase("workers");
  return j.dump();
}

std::string RunConfig::hash() const { return hex64(fnv1a(canonical())); }

std::string RunConfig::output(std::string_view name) const {
  return (std::filesystem::path(output_dir) / name).string();
}

std::string RunConfig::lm_path() const { return lm.path.empty() ? output("lm.json") : lm.path; }

std::string RunConfig::glassbox_path() const {
  return glassbox.path.empty() ? output("glassbox.json") : glassbox.path;
}

std::string RunConfig::explanation_path() const {
  return eval.explanation.empty() ? output("explanation.json") : eval.explanation;
}

std::string RunConfig::texts_path() const { return eval.texts.empty() ? corpus.path : eval.texts; }

explainer::ExplainerConfig RunConfig::explainer_config() const {
  explainer::ExplainerConfig e;
  e.texts_per_class = explainer.texts_per_class;
  e.mcts = mcts;
  e.mode = explainer::parse_mode(explainer.mode);
  e.seed = seed;
  e.workers = explainer.workers;
  e.config_hash = hash();
  // Pinned to the module defaults: only the generated corpus varies.
  e.regression = glassbox::LogRegParams{};
  return e;
}

}  // namespace coop::config
