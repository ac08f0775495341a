// Copyright 2026 The stepsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Guidance over a byte stream.
//
// Frames are a 4-byte big-endian length followed by that many bytes of
// UTF-8 JSON. The client opens with
//   {"type":"hello","version":1,"manifest_sha256":"<hex>"}
// and the server answers with the same shape, plus an optional
// "deterministic" flag; differing hashes abort the session. Each query is
//   {"id":N,"state_tokens":[...],"prefix":[...]}
// answered by
//   {"id":N,"probs":{"<token>":p,...}}   or   {"id":N,"error":"..."}
// Transports: TCP ("host:port") and a child process on stdin/stdout.

#ifndef STEPSYNTH_REMOTE_GUIDANCE_HPP_
#define STEPSYNTH_REMOTE_GUIDANCE_HPP_

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include <json.hpp>

#include "stepsynth/guidance.hpp"

namespace stepsynth {

inline constexpr int kWireVersion = 1;
inline constexpr int kDefaultRemoteTimeoutMs = 2000;
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

/// The remote end cannot be reached, timed out, or hung up.
class RemoteUnavailable : public GuidanceError {
 public:
  using GuidanceError::GuidanceError;
};

/// The two ends disagree on the vocabulary manifest.
class ManifestMismatch : public GuidanceError {
 public:
  using GuidanceError::GuidanceError;
};

/// The peer sent something that breaks the protocol.
class ProtocolError : public GuidanceError {
 public:
  using GuidanceError::GuidanceError;
};

namespace wire {

inline std::string frame(const nlohmann::json& j) {
  const std::string body = j.dump();
  if (body.size() > kMaxFrameBytes) throw ProtocolError("frame too large");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xff));
  return out + body;
}

/// Splits a byte stream into frames.
class FrameReader {
 public:
  void feed(const char* data, std::size_t n) { buf_.append(data, n); }

  /// The next complete frame, if buffered.
  std::optional<nlohmann::json> next() {
    if (buf_.size() < 4) return std::nullopt;
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buf_[i]);
    if (n > kMaxFrameBytes) throw ProtocolError("frame length " + std::to_string(n) + " too large");
    if (buf_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    const std::string body = buf_.substr(4, n);
    buf_.erase(0, 4 + static_cast<std::size_t>(n));
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProtocolError(std::string("bad frame: ") + e.what());
    }
  }

  std::size_t buffered() const { return buf_.size(); }

 private:
  std::string buf_;
};

inline nlohmann::json hello(const Vocabulary& v, std::optional<bool> deterministic = std::nullopt) {
  nlohmann::json j = {{"type", "hello"},
                      {"version", kWireVersion},
                      {"manifest_sha256", v.manifest_hash()}};
  if (deterministic) j["deterministic"] = *deterministic;
  return j;
}

inline nlohmann::json request(std::uint64_t id, const TokenSeq& state, const TokenSeq& prefix) {
  return {{"id", id}, {"state_tokens", state}, {"prefix", prefix}};
}

inline nlohmann::json response(std::uint64_t id, const GuidanceDistribution& d) {
  nlohmann::json probs = nlohmann::json::object();
  for (const auto& [t, p] : d.probs) probs[std::to_string(t)] = p;
  return {{"id", id}, {"probs", probs}};
}

/// Parses and validates a response's distribution against the vocabulary.
inline GuidanceDistribution parse_probs(const nlohmann::json& probs, const Vocabulary& v) {
  if (!probs.is_object()) throw ProtocolError("probs must be an object");
  GuidanceDistribution d;
  double total = 0.0;
  for (const auto& [key, value] : probs.items()) {
    std::size_t used = 0;
    long long t = -1;
    try {
      t = std::stoll(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size() || t < 0 || static_cast<std::size_t>(t) >= v.size())
      throw ProtocolError("bad token id '" + key + "'");
    if (!value.is_number()) throw ProtocolError("probability of " + key + " is not a number");
    const double p = value.get<double>();
    if (!std::isfinite(p) || p < 0.0 || p > 1.0 + 1e-6)
      throw ProtocolError("probability of " + key + " out of range");
    total += p;
    d.probs.emplace_back(static_cast<Token>(t), p);
  }
  if (total > 1.0 + 1e-6) throw ProtocolError("probabilities sum to " + std::to_string(total));
  return d;
}

}  // namespace wire

// ---------------------------------------------------------------------------
// Transports

/// A bidirectional byte stream over file descriptors.
class FdStream {
 public:
  FdStream(int read_fd, int write_fd, bool is_socket)
      : read_fd_(read_fd), write_fd_(write_fd), socket_(is_socket) {}
  FdStream(const FdStream&) = delete;
  FdStream& operator=(const FdStream&) = delete;
  virtual ~FdStream() { close_fds(); }

  void send(const std::string& bytes) {
    std::size_t off = 0;
    while (off < bytes.size()) {
      const ssize_t n = socket_ ? ::send(write_fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL)
                                : ::write(write_fd_, bytes.data() + off, bytes.size() - off);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw RemoteUnavailable(std::string("write failed: ") + std::strerror(errno));
      off += static_cast<std::size_t>(n);
    }
  }

  /// Blocks until a whole frame arrives or `timeout_ms` passes.
  nlohmann::json receive(int timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
      if (auto j = reader_.next()) return *j;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - std::chrono::steady_clock::now())
                            .count();
      if (left <= 0) throw RemoteUnavailable("timed out after " + std::to_string(timeout_ms) + " ms");
      pollfd p{read_fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left));
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw RemoteUnavailable(std::string("poll failed: ") + std::strerror(errno));
      if (r == 0) continue;
      char buf[65536];
      const ssize_t n = ::read(read_fd_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw RemoteUnavailable("connection closed by peer");
      reader_.feed(buf, static_cast<std::size_t>(n));
    }
  }

  /// Like receive(), but returns nullopt on a clean end of stream.
  std::optional<nlohmann::json> receive_or_eof() {
    while (true) {
      if (auto j = reader_.next()) return j;
      char buf[65536];
      const ssize_t n = ::read(read_fd_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n == 0) {
        if (reader_.buffered()) throw ProtocolError("truncated frame at end of stream");
        return std::nullopt;
      }
      if (n < 0) throw RemoteUnavailable(std::string("read failed: ") + std::strerror(errno));
      reader_.feed(buf, static_cast<std::size_t>(n));
    }
  }

 protected:
  void close_fds() {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  int read_fd_;
  int write_fd_;
  bool socket_;
  wire::FrameReader reader_;
};

/// Parses "host:port".
inline std::pair<std::string, std::string> split_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
    throw std::invalid_argument("address must look like host:port, got '" + addr + "'");
  return {addr.substr(0, colon), addr.substr(colon + 1)};
}

inline std::unique_ptr<FdStream> connect_tcp(const std::string& address, int timeout_ms) {
  const auto [host, port] = split_address(address);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw RemoteUnavailable("cannot resolve " + address + ": " + ::gai_strerror(rc));
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);
  std::string last = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    // Non-blocking connect so the timeout also covers connection setup.
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc < 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      rc = ::poll(&p, 1, timeout_ms) == 1 ? 0 : -1;
      int err = rc == 0 ? 0 : ETIMEDOUT;
      socklen_t len = sizeof err;
      if (rc == 0) ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
      if (err) {
        errno = err;
        rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return std::make_unique<FdStream>(fd, fd, true);
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  throw RemoteUnavailable("cannot connect to " + address + ": " + last);
}

/// A child process run through /bin/sh, spoken to over its stdin/stdout.
class ChildProcessStream : public FdStream {
 public:
  static std::unique_ptr<ChildProcessStream> spawn(const std::string& command) {
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw RemoteUnavailable("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw RemoteUnavailable("pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw RemoteUnavailable("fork failed");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    // A child that dies must surface as an error, not kill us.
    ::signal(SIGPIPE, SIG_IGN);
    return std::unique_ptr<ChildProcessStream>(
        new ChildProcessStream(from_child[0], to_child[1], pid));
  }

  ~ChildProcessStream() override {
    close_fds();
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

 private:
  ChildProcessStream(int read_fd, int write_fd, pid_t pid)
      : FdStream(read_fd, write_fd, false), pid_(pid) {}
  pid_t pid_;
};

// ---------------------------------------------------------------------------
// Client

/// A guidance model answered by a remote process.
class RemoteModel : public GuidanceModel {
 public:
  /// `endpoint` is "tcp:host:port", "host:port", or "stdio:<command>".
  static std::unique_ptr<RemoteModel> connect(const std::string& endpoint, Vocabulary v,
                                              int timeout_ms = kDefaultRemoteTimeoutMs) {
    std::unique_ptr<FdStream> stream;
    if (endpoint.rfind("stdio:", 0) == 0)
      stream = ChildProcessStream::spawn(endpoint.substr(6));
    else if (endpoint.rfind("tcp:", 0) == 0)
      stream = connect_tcp(endpoint.substr(4), timeout_ms);
    else
      stream = connect_tcp(endpoint, timeout_ms);
    return std::make_unique<RemoteModel>(std::move(stream), std::move(v), timeout_ms);
  }

  RemoteModel(std::unique_ptr<FdStream> stream, Vocabulary v, int timeout_ms)
      : stream_(std::move(stream)), vocab_(std::move(v)), timeout_ms_(timeout_ms) {
    stream_->send(wire::frame(wire::hello(vocab_)));
    const nlohmann::json reply = stream_->receive(timeout_ms_);
    if (!reply.is_object()) throw ProtocolError("handshake reply is not an object");
    if (reply.contains("error"))
      throw ManifestMismatch("server refused: " + reply["error"].dump());
    if (reply.value("type", "") != "hello") throw ProtocolError("expected a hello frame");
    const std::string theirs = reply.value("manifest_sha256", "");
    if (theirs != vocab_.manifest_hash())
      throw ManifestMismatch("manifest hash mismatch: local " + vocab_.manifest_hash() +
                             ", remote " + theirs);
    deterministic_ = reply.value("deterministic", false);
  }

  GuidanceDistribution next_token_dist(const GuidanceContext& ctx) override {
    const std::uint64_t id = next_id_++;
    stream_->send(wire::frame(wire::request(id, *ctx.state_tokens, ctx.step_prefix)));
    const nlohmann::json r = stream_->receive(timeout_ms_);
    if (!r.is_object() || !r.contains("id") || r["id"] != id)
      throw ProtocolError("response id does not match request " + std::to_string(id));
    if (r.contains("error")) throw GuidanceError("remote error: " + r["error"].dump());
    if (!r.contains("probs")) throw ProtocolError("response without probs");
    return wire::parse_probs(r["probs"], vocab_);
  }

  const Vocabulary& vocabulary() const override { return vocab_; }
  bool deterministic() const override { return deterministic_; }

 private:
  std::unique_ptr<FdStream> stream_;
  Vocabulary vocab_;
  int timeout_ms_;
  bool deterministic_ = false;
  std::uint64_t next_id_ = 0;
};

// ---------------------------------------------------------------------------
// Server

/// Answers one client on `stream` with `model` until the client hangs up.
/// Requests carry no depth, so the model sees depth -1.
inline void serve_guidance(GuidanceModel& model, FdStream& stream) {
  const Vocabulary& v = model.vocabulary();
  const auto first = stream.receive_or_eof();
  if (!first) return;
  if (!first->is_object() || first->value("type", "") != "hello") {
    stream.send(wire::frame({{"error", "expected hello"}}));
    return;
  }
  if (first->value("manifest_sha256", "") != v.manifest_hash()) {
    stream.send(wire::frame({{"error", "manifest mismatch"}, {"manifest_sha256", v.manifest_hash()}}));
    return;
  }
  stream.send(wire::frame(wire::hello(v, model.deterministic())));
  while (auto msg = stream.receive_or_eof()) {
    const nlohmann::json id = msg->is_object() && msg->contains("id") ? (*msg)["id"] : nlohmann::json();
    try {
      const auto state = msg->at("state_tokens").get<TokenSeq>();
      GuidanceContext ctx;
      ctx.state_tokens = std::make_shared<TokenSeq>(state);
      ctx.state_fingerprint = fingerprint(state);
      ctx.shape = StateShape::of(decode_state(state, v.max_refs()).state);
      ctx.depth = -1;
      ctx.step_prefix = msg->at("prefix").get<TokenSeq>();
      nlohmann::json r = wire::response(0, model.next_token_dist(ctx));
      r["id"] = id;
      stream.send(wire::frame(r));
    } catch (const RemoteUnavailable&) {
      throw;
    } catch (const std::exception& e) {
      stream.send(wire::frame({{"id", id}, {"error", e.what()}}));
    }
  }
}

/// Listens on 127.0.0.1:`port` (0 picks a free port). Returns the socket
/// and the bound port.
inline std::pair<int, int> listen_tcp(int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw RemoteUnavailable("socket failed");
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 8) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw RemoteUnavailable("cannot listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return {fd, ntohs(addr.sin_port)};
}

/// Accepts one connection on a listening socket.
inline std::unique_ptr<FdStream> accept_one(int listen_fd) {
  const int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) throw RemoteUnavailable(std::string("accept failed: ") + std::strerror(errno));
  return std::make_unique<FdStream>(fd, fd, true);
}

}  // namespace stepsynth

#endif  // STEPSYNTH_REMOTE_GUIDANCE_HPP_
