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

#include "coop/lm_bridge.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

namespace coop::lm {
namespace {

using Clock = std::chrono::steady_clock;

class FdReader {
 public:
  explicit FdReader(int fd) : fd_(fd) {}

  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0) throw Error("bridge_timeout", "bridge did not answer in time");
      pollfd p{fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left.count()));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw Error("bridge_io", std::string("poll: ") + std::strerror(errno));
      }
      if (r == 0) continue;
      char chunk[65536];
      const ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw Error("bridge_io", std::string("read: ") + std::strerror(errno));
      }
      if (n == 0) throw Error("bridge_closed", "bridge closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("bridge_io", std::string("write: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

class ProcessTransport final : public BridgeTransport {
 public:
  explicit ProcessTransport(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
      throw Error("bridge_io", std::string("pipe: ") + std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) throw Error("bridge_io", std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    ::fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
    ::fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
    reader_ = std::make_unique<FdReader>(read_fd_);
  }

  ~ProcessTransport() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      // The server exits on EOF; give it a moment before forcing.
      for (int i = 0; i < 200; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
        ::usleep(10000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
  }

  void write_line(const std::string& line) override { write_all(write_fd_, line + "\n"); }
  std::string read_line(std::chrono::milliseconds timeout) override {
    return reader_->read_line(timeout);
  }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::unique_ptr<FdReader> reader_;
};

class TcpTransport final : public BridgeTransport {
 public:
  TcpTransport(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
    if (rc != 0) throw Error("bridge_io", std::string("getaddrinfo: ") + ::gai_strerror(rc));
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
      fd_ = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
      if (fd_ < 0) continue;
      if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd_);
      fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) {
      throw Error("bridge_io", "cannot connect to " + host + ":" + std::to_string(port));
    }
    reader_ = std::make_unique<FdReader>(fd_);
  }
  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void write_line(const std::string& line) override { write_all(fd_, line + "\n"); }
  std::string read_line(std::chrono::milliseconds timeout) override {
    return reader_->read_line(timeout);
  }

 private:
  int fd_ = -1;
  std::unique_ptr<FdReader> reader_;
};

}  // namespace

std::unique_ptr<BridgeTransport> spawn_process_transport(const std::string& command) {
  // A dead child must surface as a read error, not kill us on write.
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<ProcessTransport>(command);
}

std::unique_ptr<BridgeTransport> connect_tcp_transport(const std::string& host,
                                                       std::uint16_t port) {
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<TcpTransport>(host, port);
}

LmBridgeClient::LmBridgeClient(std::unique_ptr<BridgeTransport> transport,
                               std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {
  const auto m = call("meta", nlohmann::json::object());
  try {
    meta_.protocol_version = m.at("protocol_version").get<int>();
    meta_.vocab_size = m.at("vocab_size").get<std::size_t>();
    meta_.bos_id = m.at("bos_id").get<TokenId>();
    meta_.eos_id = m.at("eos_id").get<TokenId>();
    meta_.model_name = m.value("model_name", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error("bridge_protocol", std::string("bad meta payload: ") + e.what() + " raw: " + m.dump());
  }
  if (meta_.protocol_version != kProtocolVersion) {
    throw Error("bridge_protocol",
                "unsupported bridge protocol version " + std::to_string(meta_.protocol_version));
  }
  if (meta_.vocab_size < 2 || meta_.eos_id < 0 ||
      static_cast<std::size_t>(meta_.eos_id) >= meta_.vocab_size) {
    throw Error("bridge_protocol", "bridge meta has an invalid vocabulary: " + m.dump());
  }
}

std::unique_ptr<LmBridgeClient> LmBridgeClient::connect(const std::string& endpoint,
                                                        std::chrono::milliseconds timeout) {
  constexpr std::string_view kTcp = "tcp://";
  if (endpoint.rfind(kTcp, 0) == 0) {
    const std::string rest = endpoint.substr(kTcp.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
      throw Error("invalid_endpoint", "expected tcp://host:port, got '" + endpoint + "'");
    }
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      port = -1;
    }
    if (port <= 0 || port > 65535) throw Error("invalid_endpoint", "bad port in '" + endpoint + "'");
    return std::make_unique<LmBridgeClient>(
        connect_tcp_transport(rest.substr(0, colon), static_cast<std::uint16_t>(port)), timeout);
  }
  if (endpoint.empty()) throw Error("invalid_endpoint", "empty bridge endpoint");
  return std::make_unique<LmBridgeClient>(spawn_process_transport(endpoint), timeout);
}

nlohmann::json LmBridgeClient::call(const std::string& op, const nlohmann::json& payload) const {
  std::lock_guard lock(mu_);
  const std::int64_t id = next_id_++;
  nlohmann::json req = {{"id", id}, {"op", op}, {"payload", payload}};
  transport_->write_line(req.dump());
  const std::string raw = transport_->read_line(timeout_);

  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    throw Error("bridge_protocol", "malformed response to '" + op + "'; raw: " + raw);
  }
  if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_integer()) {
    throw Error("bridge_protocol", "response without an integer id; raw: " + raw);
  }
  if (resp["id"].get<std::int64_t>() != id) {
    throw Error("bridge_protocol",
                "response id mismatch (expected " + std::to_string(id) + "); raw: " + raw);
  }
  if (!resp.contains("ok") || !resp["ok"].is_boolean()) {
    throw Error("bridge_protocol", "response without a boolean ok; raw: " + raw);
  }
  if (!resp["ok"].get<bool>()) {
    throw Error("bridge_error", "bridge rejected '" + op + "': " +
                                    resp.value("error", std::string("(no message)")) +
                                    "; raw: " + raw);
  }
  if (!resp.contains("payload") || !resp["payload"].is_object()) {
    throw Error("bridge_protocol", "response without a payload object; raw: " + raw);
  }
  return resp["payload"];
}

void LmBridgeClient::next_token_dist(std::span<const TokenId> context,
                                     std::span<double> out) const {
  if (out.size() != meta_.vocab_size) {
    throw Error("invalid_argument", "distribution buffer has the wrong size");
  }
  const auto payload =
      call("next_token_logprobs", {{"context", TokenSeq(context.begin(), context.end())}});
  if (!payload.contains("logprobs") || !payload["logprobs"].is_array() ||
      payload["logprobs"].size() != meta_.vocab_size) {
    throw Error("bridge_protocol", "logprobs missing or of the wrong length; raw: " + payload.dump());
  }
  double total = 0.0;
  std::size_t i = 0;
  for (const auto& v : payload["logprobs"]) {
    double lp = -INFINITY;
    if (v.is_number()) {
      lp = v.get<double>();
    } else if (!v.is_null()) {
      throw Error("bridge_protocol", "non-numeric logprob; raw: " + payload.dump());
    }
    out[i] = std::exp(lp);
    total += out[i];
    ++i;
  }
  if (!(std::fabs(total - 1.0) <= 1e-4)) {
    throw Error("bridge_protocol", "logprobs do not normalize (sum of exp = " +
                                       format_double(total) + ")");
  }
  for (auto& p : out) p /= total;
}

std::string LmBridgeClient::detokenize(std::span<const TokenId> tokens) const {
  const auto payload = call("detokenize", {{"tokens", TokenSeq(tokens.begin(), tokens.end())}});
  if (!payload.contains("text") || !payload["text"].is_string()) {
    throw Error("bridge_protocol", "detokenize payload without text; raw: " + payload.dump());
  }
  return payload["text"].get<std::string>();
}

TokenSeq LmBridgeClient::tokenize(std::string_view text) const {
  const auto payload = call("tokenize", {{"text", std::string(text)}});
  try {
    return payload.at("tokens").get<TokenSeq>();
  } catch (const nlohmann::json::exception&) {
    throw Error("bridge_protocol", "tokenize payload without tokens; raw: " + payload.dump());
  }
}

}  // namespace coop::lm
