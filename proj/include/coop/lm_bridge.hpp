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

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include "coop/language_model.hpp"
#include "json.hpp"

namespace coop::lm {

/// Line transport to a bridge server: one UTF-8 JSON object per "\n"-terminated line.
class BridgeTransport {
 public:
  virtual ~BridgeTransport() = default;
  virtual void write_line(const std::string& line) = 0;
  /// Throws Error("bridge_timeout") after `timeout`, Error("bridge_closed") on EOF.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

/// Spawns `/bin/sh -c command` and talks over its stdin/stdout.
std::unique_ptr<BridgeTransport> spawn_process_transport(const std::string& command);
/// Connects to host:port.
std::unique_ptr<BridgeTransport> connect_tcp_transport(const std::string& host, std::uint16_t port);

/// Client for an out-of-process language model.
///
/// Wire protocol: request {"id": int, "op": string, "payload": object},
/// response {"id": int, "ok": bool, "payload": object} or
/// {"id": int, "ok": false, "error": string}. Ops:
///   meta                -> {protocol_version, vocab_size, bos_id, eos_id, model_name}
///   tokenize {text}     -> {tokens}
///   detokenize {tokens} -> {text}
///   next_token_logprobs {context} -> {logprobs}  (length vocab_size)
///
/// Token ids live in the bridge's own token space; text crosses the
/// boundary as strings. Requests are serialized per client, so concurrent
/// callers are safe but not parallel.
class LmBridgeClient final : public LanguageModel {
 public:
  static constexpr int kProtocolVersion = 1;

  struct Meta {
    int protocol_version = 0;
    std::size_t vocab_size = 0;
    TokenId bos_id = 0;
    TokenId eos_id = 0;
    std::string model_name;
  };

  LmBridgeClient(std::unique_ptr<BridgeTransport> transport,
                 std::chrono::milliseconds timeout = std::chrono::seconds(30));

  /// `endpoint` is "tcp://host:port" or a command line to spawn.
  static std::unique_ptr<LmBridgeClient> connect(
      const std::string& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(30));

  const Meta& meta() const { return meta_; }

  std::size_t vocab_size() const override { return meta_.vocab_size; }
  TokenId eos_id() const override { return meta_.eos_id; }
  void next_token_dist(std::span<const TokenId> context, std::span<double> out) const override;
  using LanguageModel::next_token_dist;
  std::string detokenize(std::span<const TokenId> tokens) const override;
  TokenSeq tokenize(std::string_view text) const override;

  /// Sends one request and returns the response payload. Throws
  /// Error("bridge_protocol") carrying the raw response line on id
  /// mismatch, malformed JSON or ok=false.
  nlohmann::json call(const std::string& op, const nlohmann::json& payload) const;

  std::uint64_t requests_sent() const { return next_id_ - 1; }

 private:
  std::unique_ptr<BridgeTransport> transport_;
  std::chrono::milliseconds timeout_;
  Meta meta_;
  mutable std::mutex mu_;
  mutable std::int64_t next_id_ = 1;
};

}  // namespace coop::lm
