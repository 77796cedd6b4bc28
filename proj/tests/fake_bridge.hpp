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

// In-process model of the LM bridge wire protocol, used by the fake-bridge
// helper binary and by the TCP test server.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "coop/common.hpp"
#include "json.hpp"

namespace fake_bridge {

enum class Fault {
  none,
  wrong_id,        // echoes id + 1 on next_token_logprobs
  bad_json,        // replies with a truncated line
  not_normalized,  // logprobs sum to ~0.5 in probability
  error_reply,     // ok=false
  silent,          // never replies to next_token_logprobs
  bad_version,     // meta reports protocol_version 99
};

inline Fault parse_fault(const std::string& s) {
  if (s == "wrong_id") return Fault::wrong_id;
  if (s == "bad_json") return Fault::bad_json;
  if (s == "not_normalized") return Fault::not_normalized;
  if (s == "error_reply") return Fault::error_reply;
  if (s == "silent") return Fault::silent;
  if (s == "bad_version") return Fault::bad_version;
  return Fault::none;
}

/// Vocabulary "<s>", "</s>", "w2", ..., deterministic context-dependent
/// distribution with BOS at -inf.
struct Model {
  std::size_t vocab = 8;

  std::vector<double> logprobs(const std::vector<int>& context) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (int t : context) h = coop::splitmix64(h ^ static_cast<std::uint64_t>(t));
    std::vector<double> logits(vocab);
    double mx = -1e300;
    for (std::size_t i = 1; i < vocab; ++i) {
      logits[i] = std::sin(static_cast<double>(i) * 1.7 + static_cast<double>(h % 1000) * 0.01);
      mx = std::max(mx, logits[i]);
    }
    double z = 0.0;
    for (std::size_t i = 1; i < vocab; ++i) z += std::exp(logits[i] - mx);
    std::vector<double> out(vocab);
    out[0] = -1e30;
    for (std::size_t i = 1; i < vocab; ++i) out[i] = logits[i] - mx - std::log(z);
    return out;
  }

  std::string token(int id) const {
    if (id == 0) return "<s>";
    if (id == 1) return "</s>";
    return "w" + std::to_string(id);
  }
};

/// One response line for one request line; empty means "do not reply".
inline std::string handle(const Model& m, Fault fault, const std::string& line) {
  using nlohmann::json;
  json req;
  try {
    req = json::parse(line);
  } catch (const json::exception&) {
    return json{{"id", nullptr}, {"ok", false}, {"error", "malformed request"}}.dump();
  }
  const auto id = req.value("id", std::int64_t{-1});
  const auto op = req.value("op", std::string());
  const json payload = req.value("payload", json::object());
  auto fail = [&](const std::string& msg) {
    return json{{"id", id}, {"ok", false}, {"error", msg}}.dump();
  };
  try {
    if (op == "meta") {
      return json{{"id", id},
                  {"ok", true},
                  {"payload",
                   {{"protocol_version", fault == Fault::bad_version ? 99 : 1},
                    {"vocab_size", m.vocab},
                    {"bos_id", 0},
                    {"eos_id", 1},
                    {"model_name", "fake"}}}}
          .dump();
    }
    if (op == "next_token_logprobs") {
      switch (fault) {
        case Fault::wrong_id:
          return json{{"id", id + 1}, {"ok", true}, {"payload", {{"logprobs", m.logprobs({})}}}}.dump();
        case Fault::bad_json:
          return "{\"id\": " + std::to_string(id) + ", \"ok\": tr";
        case Fault::error_reply:
          return fail("model exploded");
        case Fault::silent:
          return {};
        default:
          break;
      }
      auto lp = m.logprobs(payload.at("context").get<std::vector<int>>());
      if (fault == Fault::not_normalized) {
        for (auto& v : lp) v -= std::log(2.0);
      }
      return json{{"id", id}, {"ok", true}, {"payload", {{"logprobs", lp}}}}.dump();
    }
    if (op == "tokenize") {
      std::vector<int> ids;
      const auto text = payload.at("text").get<std::string>();
      std::size_t pos = 0;
      while (pos < text.size()) {
        auto end = text.find(' ', pos);
        if (end == std::string::npos) end = text.size();
        const auto word = text.substr(pos, end - pos);
        if (word.size() > 1 && word[0] == 'w') ids.push_back(std::stoi(word.substr(1)));
        pos = end + 1;
      }
      return json{{"id", id}, {"ok", true}, {"payload", {{"tokens", ids}}}}.dump();
    }
    if (op == "detokenize") {
      std::string text;
      for (int t : payload.at("tokens").get<std::vector<int>>()) {
        if (t < 2) continue;
        if (!text.empty()) text.push_back(' ');
        text += m.token(t);
      }
      return json{{"id", id}, {"ok", true}, {"payload", {{"text", text}}}}.dump();
    }
    return fail("unknown op '" + op + "'");
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

}  // namespace fake_bridge
