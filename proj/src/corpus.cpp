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

#include "coop/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace coop {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace coop

namespace coop::corpus {

namespace {

bool is_alnum_ascii(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

const char* const kSpecialNames[] = {"<s>", "</s>", "<unk>"};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_alnum_ascii(c)) {
      cur.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::int64_t min_count)
    : min_count_(min_count) {
  id_to_token_.reserve(tokens.size() + kNumSpecial);
  for (const char* s : kSpecialNames) id_to_token_.emplace_back(s);
  for (auto& t : tokens) {
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) {
          return is_alnum_ascii(static_cast<unsigned char>(c)) && !(c >= 'A' && c <= 'Z');
        })) {
      throw Error("invalid_vocabulary", "vocabulary token is not a normalized word: '" + t + "'");
    }
    const auto id = static_cast<TokenId>(id_to_token_.size());
    if (!token_to_id_.emplace(t, id).second) {
      throw Error("invalid_vocabulary", "duplicate vocabulary token '" + t + "'");
    }
    id_to_token_.push_back(std::move(t));
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.find(token) != token_to_id_.end();
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw Error("invalid_token", "token id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::span<const std::string> Vocabulary::regular_tokens() const {
  return std::span<const std::string>(id_to_token_).subspan(kNumSpecial);
}

TokenSeq Vocabulary::encode(std::string_view text) const {
  const auto toks = tokenize(text);
  return encode(toks);
}

TokenSeq Vocabulary::encode(std::span<const std::string> tokens) const {
  TokenSeq ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (is_special(id)) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& t : id_to_token_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\n", 1), h);
  }
  return h;
}

Document Document::from_text(std::string text, std::optional<std::size_t> label) {
  Document d;
  d.tokens = tokenize(text);
  d.text = std::move(text);
  d.label = label;
  return d;
}

bool LabeledCorpus::labeled() const {
  return !documents.empty() &&
         std::all_of(documents.begin(), documents.end(),
                     [](const Document& d) { return d.label.has_value(); });
}

void LabeledCorpus::validate_labeled() const {
  if (documents.empty()) throw Error("empty_corpus", "empty corpus");
  if (class_names.size() < 2) {
    throw Error("degenerate_corpus", "a labeled corpus needs at least 2 classes");
  }
  for (const auto& d : documents) {
    if (!d.label) throw Error("inconsistent_labeling", "inconsistent labeling");
    if (*d.label >= class_names.size()) {
      throw Error("invalid_label", "label " + std::to_string(*d.label) + " out of range");
    }
  }
  const auto counts = class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw Error("degenerate_corpus", "class '" + class_names[c] + "' has no documents");
    }
  }
}

std::vector<std::size_t> LabeledCorpus::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& d : documents) {
    if (d.label && *d.label < counts.size()) ++counts[*d.label];
  }
  return counts;
}

Vocabulary build_vocabulary(const LabeledCorpus& corpus, std::int64_t min_count) {
  return build_vocabulary(corpus.documents, min_count);
}

Vocabulary build_vocabulary(std::span<const Document> documents, std::int64_t min_count) {
  if (min_count < 1) throw Error("invalid_argument", "min_count must be >= 1");
  if (documents.empty()) throw Error("empty_corpus", "empty corpus");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& d : documents) {
    for (const auto& t : d.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens), min_count);
}

LabeledCorpus parse_corpus(std::string_view jsonl) {
  struct Row {
    std::string text;
    std::optional<std::string> label;
  };
  std::vector<Row> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const auto where = "line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("malformed_corpus", where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string()) {
      throw Error("malformed_corpus", where + ": expected an object with a string \"text\"");
    }
    Row row{obj["text"].get<std::string>(), std::nullopt};
    if (obj.contains("label")) {
      if (!obj["label"].is_string()) {
        throw Error("malformed_corpus", where + ": \"label\" must be a string");
      }
      row.label = obj["label"].get<std::string>();
    }
    if (!rows.empty() && rows.front().label.has_value() != row.label.has_value()) {
      throw Error("inconsistent_labeling", where + ": inconsistent labeling");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("empty_corpus", "empty corpus");

  LabeledCorpus out;
  std::set<std::string> labels;
  for (const auto& r : rows) {
    if (r.label) labels.insert(*r.label);
  }
  out.class_names.assign(labels.begin(), labels.end());
  out.documents.reserve(rows.size());
  for (auto& r : rows) {
    std::optional<std::size_t> label;
    if (r.label) {
      label = static_cast<std::size_t>(
          std::lower_bound(out.class_names.begin(), out.class_names.end(), *r.label) -
          out.class_names.begin());
    }
    out.documents.push_back(Document::from_text(std::move(r.text), label));
  }
  return out;
}

LabeledCorpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("file_not_found", "cannot open corpus '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

std::string serialize_corpus(const LabeledCorpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents) {
    nlohmann::json obj;
    obj["text"] = d.text;
    if (d.label) obj["label"] = corpus.class_names.at(*d.label);
    out += obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const LabeledCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write corpus '" + path + "'");
  out << serialize_corpus(corpus);
}

std::uint64_t corpus_hash(const LabeledCorpus& corpus) {
  std::uint64_t h = fnv1a("corpus");
  for (const auto& c : corpus.class_names) {
    h = fnv1a(c, h);
    h = fnv1a(std::string_view("\0", 1), h);
  }
  h = fnv1a(serialize_corpus(corpus), h);
  return h;
}

}  // namespace coop::corpus
