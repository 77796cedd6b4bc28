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

#include "coop/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "coop/simd/kernels.hpp"

namespace coop::mcts {

std::string_view to_string(Aggregation a) { return a == Aggregation::mean ? "mean" : "max"; }

std::string_view to_string(TokenChoice c) {
  return c == TokenChoice::highest_score ? "highest_score" : "most_played";
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "max") return Aggregation::max;
  throw Error("invalid_config", "aggregation must be 'mean' or 'max', got '" + std::string(s) + "'");
}

TokenChoice parse_token_choice(std::string_view s) {
  if (s == "highest_score") return TokenChoice::highest_score;
  if (s == "most_played") return TokenChoice::most_played;
  throw Error("invalid_config",
              "token_choice must be 'highest_score' or 'most_played', got '" + std::string(s) + "'");
}

void MctsConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("invalid_config", "mcts: " + what); };
  if (!(c_puct >= 0.0) || !std::isfinite(c_puct)) fail("c_puct must be finite and >= 0");
  if (playouts_per_token < 1) fail("playouts_per_token must be >= 1");
  if (max_length < 1) fail("max_length must be >= 1");
  if (rollout_max_tokens < 0) fail("rollout_max_tokens must be >= 0");
  if (!(rollout_temperature > 0.0) || !std::isfinite(rollout_temperature)) {
    fail("rollout_temperature must be finite and > 0");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) fail("top_p must be in (0, 1]");
}

std::string MctsConfig::canonical() const {
  std::ostringstream os;
  os << "c_puct=" << format_double(c_puct) << ";playouts_per_token=" << playouts_per_token
     << ";max_length=" << max_length << ";rollout_max_tokens=" << rollout_max_tokens
     << ";aggregation=" << to_string(aggregation) << ";token_choice=" << to_string(token_choice)
     << ";rollout_temperature=" << format_double(rollout_temperature)
     << ";top_p=" << format_double(top_p) << ";rng_seed=" << rng_seed;
  return os.str();
}

double puct_score(double value, std::uint32_t visits, double prior, std::uint64_t parent_visits,
                  double c_puct, Aggregation aggregation) {
  const double n = static_cast<double>(visits);
  double exploit;
  if (aggregation == Aggregation::mean) {
    exploit = visits == 0 ? 0.0 : value / n;
  } else {
    exploit = value;
  }
  return exploit + c_puct * prior * std::sqrt(static_cast<double>(parent_visits)) / (1.0 + n);
}

std::size_t MctsNode::find_child(TokenId token) const {
  auto it = std::lower_bound(child_token_.begin(), child_token_.end(), token);
  if (it == child_token_.end() || *it != token) return child_token_.size();
  return static_cast<std::size_t>(it - child_token_.begin());
}

std::string sequence_text(const lm::LanguageModel& lm, std::span<const TokenId> tokens) {
  while (!tokens.empty() && tokens.back() == lm.eos_id()) tokens = tokens.first(tokens.size() - 1);
  return lm.detokenize(tokens);
}

MctsTree::MctsTree(TokenSeq prefix)
    : prefix_(std::move(prefix)), root_(std::make_unique<MctsNode>(-1, false)) {}

void MctsTree::expand(MctsNode& node, std::span<const double> dist,
                      const MctsConfig& config) const {
  std::vector<TokenId> keep;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > 0.0) keep.push_back(static_cast<TokenId>(i));
  }
  if (config.top_p < 1.0 && !keep.empty()) {
    std::vector<TokenId> by_prob = keep;
    std::stable_sort(by_prob.begin(), by_prob.end(),
                     [&](TokenId a, TokenId b) { return dist[a] > dist[b]; });
    double mass = 0.0;
    std::size_t cut = 0;
    while (cut < by_prob.size() && mass < config.top_p) mass += dist[by_prob[cut++]];
    by_prob.resize(cut);
    std::sort(by_prob.begin(), by_prob.end());
    keep = std::move(by_prob);
  }
  double mass = 0.0;
  for (TokenId t : keep) mass += dist[t];

  node.child_token_ = keep;
  node.child_prior_.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) node.child_prior_[i] = dist[keep[i]] / mass;
  node.child_value_.assign(keep.size(), 0.0);
  node.child_visits_.assign(keep.size(), 0);
  node.child_node_.clear();
  node.child_node_.resize(keep.size());
  node.expanded_ = true;
}

void MctsTree::expand_root(const lm::LanguageModel& lm, const MctsConfig& config) {
  if (root_->expanded()) return;
  dist_.resize(lm.vocab_size());
  lm.next_token_dist(prefix_, dist_);
  expand(*root_, dist_, config);
}

void MctsTree::run_playout(const lm::LanguageModel& lm, const glassbox::ClassifierScorer& scorer,
                           ClassId cls, const MctsConfig& config, Rng& rng) {
  if (!root_->expanded()) throw Error("invalid_state", "run_playout needs an expanded root");
  if (root_->num_children() == 0) throw Error("invalid_state", "root has no children");

  const bool sums = config.aggregation == Aggregation::mean;
  const auto max_len = static_cast<std::size_t>(config.max_length);

  struct Step {
    MctsNode* parent;
    std::size_t index;
  };
  std::vector<Step> path;
  TokenSeq seq = prefix_;
  MctsNode* node = root_.get();
  std::uint64_t node_visits = root_visits_;

  // Selection.
  while (node->expanded() && node->num_children() > 0) {
    simd::PuctInputs in;
    in.prior = node->child_prior_;
    in.value = node->child_value_;
    in.visits = node->child_visits_;
    in.c_puct = config.c_puct;
    in.sqrt_parent_visits = std::sqrt(static_cast<double>(node_visits));
    in.value_is_sum = sums;
    const std::size_t idx = simd::puct_argmax(in);

    path.push_back({node, idx});
    const TokenId tok = node->child_token_[idx];
    seq.push_back(tok);
    node_visits = node->child_visits_[idx];
    auto& slot = node->child_node_[idx];
    if (!slot) slot = std::make_unique<MctsNode>(tok, tok == lm.eos_id());
    node = slot.get();
  }

  // Expansion and roll-out. The leaf is only committed after scoring.
  MctsNode* leaf = node;
  const bool capped = !leaf->terminal() && seq.size() >= max_len;
  bool expand_leaf = false;
  TokenSeq full = seq;
  if (!leaf->terminal() && !capped && !leaf->expanded()) {
    expand_leaf = true;
    dist_.resize(lm.vocab_size());
    lm.next_token_dist(seq, dist_);
    const std::size_t budget =
        std::min(static_cast<std::size_t>(config.rollout_max_tokens), max_len - seq.size());
    if (budget > 0) {
      const TokenId first = lm::sample_from(dist_, rng, config.rollout_temperature);
      full.push_back(first);
      if (first != lm.eos_id() && budget > 1) {
        full = lm::sample_continuation(lm, full, budget - 1, rng, config.rollout_temperature);
      }
    }
  }

  const auto probs = scorer.score(sequence_text(lm, full));
  if (cls >= probs.size()) throw Error("invalid_argument", "class id out of scorer range");
  const double score = std::clamp(probs[cls], 0.0, 1.0);

  if (expand_leaf) expand(*leaf, dist_, config);

  // Back-propagation.
  for (const Step& s : path) {
    ++s.parent->child_visits_[s.index];
    double& v = s.parent->child_value_[s.index];
    v = sums ? v + score : std::max(v, score);
  }
  ++root_visits_;
  root_value_ = sums ? root_value_ + score : std::max(root_value_, score);
}

std::size_t MctsTree::choose_child(const MctsConfig& config) const {
  const MctsNode& r = *root_;
  const bool sums = config.aggregation == Aggregation::mean;
  auto exploit = [&](std::size_t i) {
    return sums ? r.child_value_[i] / static_cast<double>(r.child_visits_[i]) : r.child_value_[i];
  };
  std::size_t best = r.num_children();
  for (std::size_t i = 0; i < r.num_children(); ++i) {
    if (r.child_visits_[i] == 0) continue;
    if (best == r.num_children()) {
      best = i;
      continue;
    }
    const double e = exploit(i);
    const double be = exploit(best);
    const auto n = r.child_visits_[i];
    const auto bn = r.child_visits_[best];
    bool better;
    if (config.token_choice == TokenChoice::highest_score) {
      better = e > be || (e == be && n > bn);
    } else {
      better = n > bn || (n == bn && e > be);
    }
    if (better) best = i;  // earlier index wins remaining ties
  }
  if (best == r.num_children()) {
    throw Error("budget_too_small", "no visited child at the root; increase the playout budget");
  }
  return best;
}

TokenId MctsTree::decode_token(const MctsConfig& config) {
  const std::size_t idx = choose_child(config);
  const TokenId tok = root_->child_token_[idx];
  const auto visits = root_->child_visits_[idx];
  const double value = root_->child_value_[idx];
  std::unique_ptr<MctsNode> next = std::move(root_->child_node_[idx]);
  if (!next) next = std::make_unique<MctsNode>(tok, false);
  root_ = std::move(next);
  root_visits_ = visits;
  root_value_ = value;
  prefix_.push_back(tok);
  return tok;
}

namespace {
std::uint64_t subtree_visits(const MctsNode& node) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < node.num_children(); ++i) {
    total += node.child_visits(i);
    if (const MctsNode* c = node.child(i)) total += subtree_visits(*c);
  }
  return total;
}
}  // namespace

std::uint64_t MctsTree::total_subtree_visits() const {
  return root_visits_ + subtree_visits(*root_);
}

GenerationResult generate(const lm::LanguageModel& lm, const glassbox::ClassifierScorer& scorer,
                          ClassId cls, const TokenSeq& prompt, const MctsConfig& config) {
  config.validate();
  if (prompt.size() >= static_cast<std::size_t>(config.max_length)) {
    throw Error("invalid_argument", "prompt must be shorter than max_length");
  }
  if (cls >= scorer.num_classes()) throw Error("invalid_argument", "class id out of range");

  Rng rng(config.rng_seed);
  MctsTree tree(prompt);
  GenerationResult result;
  result.cls = cls;
  result.config = config;

  const auto max_len = static_cast<std::size_t>(config.max_length);
  while (tree.prefix().size() < max_len) {
    tree.expand_root(lm, config);
    for (int p = 0; p < config.playouts_per_token; ++p) {
      tree.run_playout(lm, scorer, cls, config, rng);
      ++result.playout_count;
    }
    if (tree.decode_token(config) == lm.eos_id()) break;
  }

  result.tokens = tree.prefix();
  if (!result.tokens.empty() && result.tokens.back() == lm.eos_id()) result.tokens.pop_back();
  result.text = lm.detokenize(result.tokens);
  result.final_score = scorer.score(result.text).at(cls);
  return result;
}

}  // namespace coop::mcts
