// Copyright 2026 The embinv Authors.
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

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <list>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "embinv/core.hpp"
#include "embinv/defenses.hpp"
#include "embinv/error.hpp"

// Simulated Embeddings-as-a-Service endpoint. One JSON object per line in each
// direction:
//
//   -> {"op":"embed","texts":[...],"defense":{...},"ids":[...],"langs":[...]}
//   <- {"embeddings":[[...],...],"dim":N,"queries_used":M}
//   <- {"error":"unknown_op" | "bad_request" | "unknown_lang"}
//
// "defense", "ids" and "langs" are optional. ids key the per-embedding noise
// stream (the text is used when absent); langs tag embeddings for masking and
// language-agnostic centering.
namespace embinv::eaas {

class RemoteError : public Error {
 public:
  explicit RemoteError(std::string code)
      : Error("EaaS error: " + code), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline std::string error_frame(std::string_view code) {
  return std::string("{\"error\":\"") + std::string(code) + "\"}";
}

// Buffered line reader over a socket.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  // False on EOF or error before a complete line.
  bool read_line(std::string& line) {
    while (true) {
      auto nl = buf_.find('\n', scan_);
      if (nl != std::string::npos) {
        line.assign(buf_, 0, nl);
        buf_.erase(0, nl + 1);
        scan_ = 0;
        return true;
      }
      scan_ = buf_.size();
      char chunk[65536];
      ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buf_;
  std::size_t scan_ = 0;
};

inline bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace detail

// Serves `embedder` behind the wire protocol. The embedder's query counter is
// the only shared mutable state; connections are handled concurrently and
// requests on one connection in order.
class Server {
 public:
  Server(BlackBoxEmbedder& embedder, DefenseConfig default_defense = {}, GroupMeans means = {})
      : embedder_(embedder), default_defense_(std::move(default_defense)),
        means_(std::move(means)) {
    default_defense_.validate();
  }
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  // Binds and starts accepting in a background thread. Port 0 picks an
  // ephemeral port; the bound port is returned.
  std::uint16_t start(std::uint16_t port = 0, const std::string& bind_addr = "127.0.0.1") {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bind_addr.c_str(), &addr.sin_addr) != 1) {
      throw ConfigError("bad bind address " + bind_addr);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 64) != 0) {
      const std::string msg = std::strerror(errno);
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw Error("bind/listen on port " + std::to_string(port) + ": " + msg);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return port_;
  }

  void wait() {
    if (accept_thread_.joinable()) accept_thread_.join();
  }

  void stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::list<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
      workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
  }

  std::uint16_t port() const { return port_; }
  std::uint64_t queries_used() const { return embedder_.queries_used(); }

  // Request line -> response line (without the trailing newline).
  std::string handle(std::string_view line) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      return detail::error_frame("bad_request");
    }
    if (!req.is_object() || !req.contains("op") || !req["op"].is_string()) {
      return detail::error_frame("bad_request");
    }
    if (req["op"] != "embed") return detail::error_frame("unknown_op");

    std::vector<std::string> texts, ids, langs;
    DefenseConfig defense = default_defense_;
    try {
      texts = req.at("texts").get<std::vector<std::string>>();
      if (texts.empty()) return detail::error_frame("bad_request");
      if (req.contains("ids")) ids = req["ids"].get<std::vector<std::string>>();
      if (req.contains("langs")) langs = req["langs"].get<std::vector<std::string>>();
      if (req.contains("defense") && !req["defense"].is_null()) {
        defense = req["defense"].get<DefenseConfig>();
      }
    } catch (const nlohmann::json::exception&) {
      return detail::error_frame("bad_request");
    } catch (const ConfigError&) {
      return detail::error_frame("bad_request");
    }
    if ((!ids.empty() && ids.size() != texts.size()) ||
        (!langs.empty() && langs.size() != texts.size())) {
      return detail::error_frame("bad_request");
    }

    std::vector<Embedding> out;
    try {
      if (defense.masking || defense.language_agnostic) {
        for (const auto& l : langs) {
          if (defense.masking && !defense.masking->language_ids.contains(l)) {
            return detail::error_frame("unknown_lang");
          }
          if (defense.language_agnostic && !means_.contains(l)) {
            return detail::error_frame("unknown_lang");
          }
        }
        if (langs.empty()) return detail::error_frame("unknown_lang");
      }
      out = embedder_.embed_batch(texts);
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (!langs.empty()) out[i].set_lang(langs[i]);
        if (defense.enabled()) {
          DefenseContext ctx{means_, ids.empty() ? texts[i] : ids[i], std::nullopt};
          out[i] = apply_defense_stack(out[i], defense, ctx);
        }
      }
    } catch (const UnknownLanguageError&) {
      return detail::error_frame("unknown_lang");
    } catch (const Error&) {
      return detail::error_frame("bad_request");
    }

    std::string resp;
    resp.reserve(out.size() * embedder_.dimension() * 22 + 64);
    resp += "{\"embeddings\":[";
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (i) resp += ',';
      resp += '[';
      auto v = out[i].values();
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (j) resp += ',';
        detail::append_double(resp, v[j]);
      }
      resp += ']';
    }
    resp += "],\"dim\":" + std::to_string(embedder_.dimension()) +
            ",\"queries_used\":" + std::to_string(embedder_.queries_used()) + "}";
    return resp;
  }

 private:
  void accept_loop() {
    while (running_) {
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      detail::set_nodelay(fd);
      std::lock_guard lock(mu_);
      if (!running_) {
        ::close(fd);
        return;
      }
      client_fds_.insert(fd);
      workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
  }

  void serve_connection(int fd) {
    detail::LineReader reader(fd);
    std::string line;
    while (reader.read_line(line)) {
      std::string resp = handle(line);
      resp += '\n';
      if (!detail::send_all(fd, resp)) break;
    }
    std::lock_guard lock(mu_);
    client_fds_.erase(fd);
    ::close(fd);
  }

  BlackBoxEmbedder& embedder_;
  DefenseConfig default_defense_;
  GroupMeans means_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::set<int> client_fds_;
  std::list<std::thread> workers_;
};

struct EmbedResponse {
  std::vector<Embedding> embeddings;
  std::size_t dim = 0;
  std::uint64_t queries_used = 0;
};

// Parses a success frame. The layout is the one Server::handle writes, but
// any whitespace-free JSON of the same shape is accepted.
inline EmbedResponse parse_embed_response(std::string_view line) {
  if (line.find("\"error\"") != std::string_view::npos) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_object() && j.contains("error") && j["error"].is_string()) {
      throw RemoteError(j["error"].get<std::string>());
    }
    throw ParseError("malformed EaaS error frame");
  }
  EmbedResponse resp;
  auto fail = [] { throw ParseError("malformed EaaS embed response"); };
  const char* p = line.data();
  const char* end = p + line.size();
  auto expect = [&](std::string_view lit) {
    if (static_cast<std::size_t>(end - p) < lit.size() || std::string_view(p, lit.size()) != lit) fail();
    p += lit.size();
  };
  auto read_uint = [&](std::uint64_t& out) {
    auto r = std::from_chars(p, end, out);
    if (r.ec != std::errc()) fail();
    p = r.ptr;
  };
  expect("{\"embeddings\":[");
  std::vector<double> values;
  while (p < end && *p != ']') {
    expect("[");
    values.clear();
    while (p < end && *p != ']') {
      double v = 0.0;
      auto r = std::from_chars(p, end, v);
      if (r.ec != std::errc()) fail();
      p = r.ptr;
      values.push_back(v);
      if (p < end && *p == ',') ++p;
    }
    expect("]");
    resp.embeddings.emplace_back(values);
    if (p < end && *p == ',') ++p;
  }
  expect("],\"dim\":");
  std::uint64_t dim = 0;
  read_uint(dim);
  resp.dim = static_cast<std::size_t>(dim);
  expect(",\"queries_used\":");
  read_uint(resp.queries_used);
  expect("}");
  return resp;
}

class Client {
 public:
  Client(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
      throw Error("cannot resolve " + host);
    }
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
    ::freeaddrinfo(res);
    if (!ok) {
      if (fd_ >= 0) ::close(fd_);
      throw Error("cannot connect to " + host + ":" + std::to_string(port));
    }
    detail::set_nodelay(fd_);
    reader_.emplace(fd_);
  }
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;
  ~Client() {
    if (fd_ >= 0) ::close(fd_);
  }

  // Sends one frame and returns the response line.
  std::string roundtrip(std::string_view request) {
    std::string frame(request);
    frame += '\n';
    if (!detail::send_all(fd_, frame)) throw Error("EaaS connection closed on send");
    std::string line;
    if (!reader_->read_line(line)) throw Error("EaaS connection closed on receive");
    return line;
  }

  EmbedResponse embed(std::span<const std::string> texts,
                      const std::optional<DefenseConfig>& defense = std::nullopt,
                      std::span<const std::string> ids = {},
                      std::span<const std::string> langs = {}) {
    nlohmann::json req{{"op", "embed"}, {"texts", texts}};
    if (defense) req["defense"] = *defense;
    if (!ids.empty()) req["ids"] = ids;
    if (!langs.empty()) req["langs"] = langs;
    auto resp = parse_embed_response(roundtrip(req.dump()));
    last_queries_used_ = resp.queries_used;
    if (!langs.empty()) {
      for (std::size_t i = 0; i < resp.embeddings.size(); ++i) {
        resp.embeddings[i].set_lang(langs[i]);
      }
    }
    return resp;
  }

  std::uint64_t last_queries_used() const { return last_queries_used_; }

 private:
  int fd_ = -1;
  std::optional<detail::LineReader> reader_;
  std::uint64_t last_queries_used_ = 0;
};

// Undefended black-box access through the wire. Each text costs one query on
// the server; the local counter mirrors what this client spent.
class RemoteEmbedder final : public BlackBoxEmbedder {
 public:
  RemoteEmbedder(Client& client, std::size_t dim) : client_(client), dim_(dim) {}

  Embedding embed(std::string_view text) override {
    const std::string t(text);
    return std::move(embed_batch(std::span(&t, 1)).front());
  }

  std::vector<Embedding> embed_batch(std::span<const std::string> texts) override {
    if (texts.empty()) return {};
    // An explicit empty defense: the attacker's own queries are never
    // post-processed.
    auto resp = client_.embed(texts, DefenseConfig{});
    if (resp.dim != dim_) throw DimensionError("remote embedder dimension changed");
    queries_ += texts.size();
    return std::move(resp.embeddings);
  }

  std::size_t dimension() const override { return dim_; }
  std::uint64_t queries_used() const override { return queries_.load(); }

 private:
  Client& client_;
  std::size_t dim_;
  std::atomic<std::uint64_t> queries_{0};
};

}  // namespace embinv::eaas
