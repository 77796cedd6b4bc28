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

#include "coop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "coop/common.hpp"

namespace coop::synthetic {

void PlantedConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("invalid_config", "planted: " + what); };
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (num_docs < num_classes) fail("num_docs must be >= num_classes");
  if (keywords_per_class < 1) fail("keywords_per_class must be >= 1");
  if (background_vocab < 1) fail("background_vocab must be >= 1");
  if (tilted_per_class < 0 || tilted_per_class * num_classes >= background_vocab) {
    fail("tilted words must fit in the background vocabulary");
  }
  if (!(keyword_rate >= 0 && tilt_rate >= 0 && keyword_rate + tilt_rate <= 1)) {
    fail("keyword_rate + tilt_rate must lie in [0, 1]");
  }
  if (!(overlap >= 0 && overlap <= 1)) fail("overlap must lie in [0, 1]");
  if (min_length < 1 || max_length < min_length) fail("need 1 <= min_length <= max_length");
}

std::string class_name(int cls) { return "class" + std::to_string(cls); }

std::string keyword(int cls, int index) {
  return "c" + std::to_string(cls) + "kw" + std::to_string(index);
}

std::string background_word(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "bg%03d", index);
  return buf;
}

std::vector<std::vector<std::string>> planted_keywords(const PlantedConfig& config) {
  std::vector<std::vector<std::string>> out(static_cast<std::size_t>(config.num_classes));
  for (int c = 0; c < config.num_classes; ++c) {
    for (int j = 0; j < config.keywords_per_class; ++j) out[c].push_back(keyword(c, j));
  }
  return out;
}

namespace {

/// Inverse-CDF sampler over fixed weights.
class Categorical {
 public:
  explicit Categorical(std::vector<double> weights) : cdf_(std::move(weights)) {
    double acc = 0.0;
    for (auto& w : cdf_) w = (acc += w);
    for (auto& w : cdf_) w /= acc;
  }
  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

std::vector<double> zipf_weights(int n, double exponent) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), exponent);
  return w;
}

// Graded frequencies: item j of K has weight (K - j).
std::vector<double> graded_weights(int k) {
  std::vector<double> w(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) w[j] = static_cast<double>(k - j);
  return w;
}

// Tilted words of class c: every num_classes-th background word starting
// at c + 1, so they are spread across the Zipf ranks.
int tilted_word(const PlantedConfig& cfg, int cls, int j) {
  return 1 + cls + j * cfg.num_classes;
}

int uniform_int(Rng& rng, int lo, int hi) {
  const auto span = static_cast<double>(hi - lo + 1);
  return lo + std::min(hi - lo, static_cast<int>(uniform01(rng) * span));
}

}  // namespace

corpus::LabeledCorpus make_planted_corpus(const PlantedConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const Categorical background(zipf_weights(config.background_vocab, config.zipf_exponent));
  const Categorical kw(graded_weights(config.keywords_per_class));
  const Categorical tilt(graded_weights(std::max(1, config.tilted_per_class)));

  corpus::LabeledCorpus out;
  for (int c = 0; c < config.num_classes; ++c) out.class_names.push_back(class_name(c));
  out.documents.reserve(static_cast<std::size_t>(config.num_docs));

  for (int i = 0; i < config.num_docs; ++i) {
    const int cls = i % config.num_classes;
    const int len = uniform_int(rng, config.min_length, config.max_length);
    std::string text;
    for (int s = 0; s < len; ++s) {
      const double u = uniform01(rng);
      std::string word;
      if (u < config.keyword_rate) {
        int owner = cls;
        if (uniform01(rng) < config.overlap) {
          owner = uniform_int(rng, 0, config.num_classes - 2);
          if (owner >= cls) ++owner;
        }
        word = keyword(owner, static_cast<int>(kw(rng)));
      } else if (u < config.keyword_rate + config.tilt_rate && config.tilted_per_class > 0) {
        word = background_word(
            tilted_word(config, cls, static_cast<int>(tilt(rng))));
      } else {
        word = background_word(static_cast<int>(background(rng)));
      }
      if (!text.empty()) text.push_back(' ');
      text += word;
    }
    out.documents.push_back(corpus::Document::from_text(std::move(text), cls));
  }
  return out;
}

corpus::LabeledCorpus make_single_keyword_texts(const PlantedConfig& config, int n,
                                                std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const Categorical background(zipf_weights(config.background_vocab, config.zipf_exponent));

  // Background words that are nobody's tilted word.
  std::vector<bool> tilted(static_cast<std::size_t>(config.background_vocab), false);
  for (int c = 0; c < config.num_classes; ++c) {
    for (int j = 0; j < config.tilted_per_class; ++j) tilted[tilted_word(config, c, j)] = true;
  }

  corpus::LabeledCorpus out;
  for (int c = 0; c < config.num_classes; ++c) out.class_names.push_back(class_name(c));
  for (int i = 0; i < n; ++i) {
    const int cls = i % config.num_classes;
    const int len = uniform_int(rng, config.min_length, config.max_length);
    const int at = uniform_int(rng, 0, len - 1);
    std::string text;
    for (int s = 0; s < len; ++s) {
      std::string word;
      if (s == at) {
        word = keyword(cls, uniform_int(rng, 0, config.keywords_per_class - 1));
      } else {
        std::size_t b;
        do {
          b = background(rng);
        } while (tilted[b]);
        word = background_word(static_cast<int>(b));
      }
      if (!text.empty()) text.push_back(' ');
      text += word;
    }
    out.documents.push_back(corpus::Document::from_text(std::move(text), cls));
  }
  return out;
}

}  // namespace coop::synthetic
