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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "coop/common.hpp"
#include "coop/glassbox.hpp"
#include "coop/language_model.hpp"

namespace coop::mcts {

enum class Aggregation { mean, max };
enum class TokenChoice { highest_score, most_played };

std::string_view to_string(Aggregation a);
std::string_view to_string(TokenChoice c);
Aggregation parse_aggregation(std::string_view s);
TokenChoice parse_token_choice(std::string_view s);

struct MctsConfig {
  double c_puct = 3.0;
  int playouts_per_token = 50;
  /// Cap on prompt + generated tokens (EOS excluded).
  int max_length = 40;
  int rollout_max_tokens = 40;
  Aggregation aggregation = Aggregation::mean;
  TokenChoice token_choice = TokenChoice::highest_score;
  double rollout_temperature = 1.0;
  /// Children keep the smallest prior mass >= top_p; 1 disables truncation.
  double top_p = 1.0;
  std::uint64_t rng_seed = 0;

  /// Throws Error("invalid_config") when a field is out of range.
  void validate() const;
  /// Stable key=value rendering, used for hashing.
  std::string canonical() const;
};

/// PUCT value of a child: exploit + c_puct * prior * sqrt(N) / (1 + n), where
/// exploit is value / n for mean aggregation (0 when n == 0) and the running
/// maximum for max aggregation.
double puct_score(double value, std::uint32_t visits, double prior, std::uint64_t parent_visits,
                  double c_puct, Aggregation aggregation);

/// Search node. Per-child statistics live in the parent as parallel arrays
/// (the selection kernel scans them); child nodes are created on first visit.
class MctsNode {
 public:
  MctsNode(TokenId token, bool terminal) : token_(token), terminal_(terminal) {}

  TokenId token() const { return token_; }
  bool terminal() const { return terminal_; }
  bool expanded() const { return expanded_; }
  std::size_t num_children() const { return child_token_.size(); }

  TokenId child_token(std::size_t i) const { return child_token_[i]; }
  double child_prior(std::size_t i) const { return child_prior_[i]; }
  std::uint32_t child_visits(std::size_t i) const { return child_visits_[i]; }
  /// Score sum (mean aggregation) or running maximum (max aggregation).
  double child_value(std::size_t i) const { return child_value_[i]; }
  const MctsNode* child(std::size_t i) const { return child_node_[i].get(); }
  /// Index of the child carrying `token`, or num_children().
  std::size_t find_child(TokenId token) const;

 private:
  friend class MctsTree;

  TokenId token_;
  bool terminal_;
  bool expanded_ = false;
  std::vector<TokenId> child_token_;
  std::vector<double> child_prior_;
  std::vector<double> child_value_;
  std::vector<std::uint32_t> child_visits_;
  std::vector<std::unique_ptr<MctsNode>> child_node_;
};

/// Search state for one generation: the decoded prefix and the tree below it.
class MctsTree {
 public:
  explicit MctsTree(TokenSeq prefix);

  const TokenSeq& prefix() const { return prefix_; }
  const MctsNode& root() const { return *root_; }
  std::uint64_t root_visits() const { return root_visits_; }
  double root_value() const { return root_value_; }

  /// Creates the root's children from the LM distribution after the prefix.
  void expand_root(const lm::LanguageModel& lm, const MctsConfig& config);

  /// One selection / expansion / roll-out / back-propagation iteration.
  /// A scorer exception leaves the tree unchanged.
  void run_playout(const lm::LanguageModel& lm, const glassbox::ClassifierScorer& scorer,
                   ClassId cls, const MctsConfig& config, Rng& rng);

  /// Index of the root child the decoding rule picks. Throws
  /// Error("budget_too_small") when no child has been visited.
  std::size_t choose_child(const MctsConfig& config) const;

  /// Appends the chosen token to the prefix and re-roots on its subtree,
  /// keeping the subtree statistics.
  TokenId decode_token(const MctsConfig& config);

  /// Sum of visits over every node of the current tree (root included).
  std::uint64_t total_subtree_visits() const;

 private:
  void expand(MctsNode& node, std::span<const double> dist, const MctsConfig& config) const;

  TokenSeq prefix_;
  std::unique_ptr<MctsNode> root_;
  std::uint64_t root_visits_ = 0;
  double root_value_ = 0.0;
  std::vector<double> dist_;  // scratch
};

struct GenerationResult {
  std::string text;
  TokenSeq tokens;
  double final_score = 0.0;
  ClassId cls = 0;
  std::uint64_t playout_count = 0;
  MctsConfig config;
};

/// Decodes one sequence that scores high on `cls` while staying plausible
/// under the LM: playouts_per_token playouts, then one decode step, until
/// EOS is chosen or max_length is reached. Deterministic given rng_seed.
GenerationResult generate(const lm::LanguageModel& lm, const glassbox::ClassifierScorer& scorer,
                          ClassId cls, const TokenSeq& prompt, const MctsConfig& config);

/// Text of a token sequence as seen by the scorer (EOS and BOS dropped).
std::string sequence_text(const lm::LanguageModel& lm, std::span<const TokenId> tokens);

}  // namespace coop::mcts
