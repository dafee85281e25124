/* Copyright 2026 The trimctl Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "trimctl/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "trimctl/protocol.hpp"

namespace trimctl {
namespace {

bool parse_bind(const std::string& bind, std::string* host, std::string* port) {
  auto colon = bind.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == bind.size()) {
    return false;
  }
  *host = bind.substr(0, colon);
  *port = bind.substr(colon + 1);
  return true;
}

}  // namespace

NdjsonServer::NdjsonServer(Service& service, std::string bind_address)
    : service_(service), bind_address_(std::move(bind_address)) {}

NdjsonServer::~NdjsonServer() {
  request_stop();
  // run() performs the teardown; if run() was never entered, reap here.
  if (flusher_.joinable()) flusher_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

bool NdjsonServer::start(
    const std::function<void(const std::string&)>& on_ready) {
  std::string host, port;
  if (!parse_bind(bind_address_, &host, &port)) {
    std::fprintf(stderr, "invalid bind address: %s\n", bind_address_.c_str());
    return false;
  }

  struct addrinfo hints {};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  struct addrinfo* res = nullptr;
  int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0 || res == nullptr) {
    std::fprintf(stderr, "cannot resolve %s: %s\n", bind_address_.c_str(),
                 gai_strerror(rc));
    return false;
  }

  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (listen_fd_ < 0) {
    std::perror("socket");
    ::freeaddrinfo(res);
    return false;
  }
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) < 0) {
    std::perror("bind");
    ::freeaddrinfo(res);
    ::close(listen_fd_);
    listen_fd_ = -1;
    return false;
  }
  ::freeaddrinfo(res);
  if (::listen(listen_fd_, 64) < 0) {
    std::perror("listen");
    ::close(listen_fd_);
    listen_fd_ = -1;
    return false;
  }

  struct sockaddr_in actual {};
  socklen_t alen = sizeof(actual);
  if (::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&actual), &alen) ==
      0) {
    port_ = ntohs(actual.sin_port);
  }

  flusher_ = std::thread([this] { flusher_loop(); });

  if (on_ready) {
    char buf[INET_ADDRSTRLEN] = {0};
    ::inet_ntop(AF_INET, &actual.sin_addr, buf, sizeof(buf));
    on_ready(std::string(buf) + ":" + std::to_string(port_));
  }
  return true;
}

void NdjsonServer::request_stop() {
  stopping_.store(true, std::memory_order_release);
  if (listen_fd_ >= 0) {
    // shutdown() is async-signal-safe and unblocks accept().
    ::shutdown(listen_fd_, SHUT_RDWR);
  }
}

void NdjsonServer::run() {
  while (!stopping_.load(std::memory_order_acquire)) {
    struct sockaddr_in peer {};
    socklen_t plen = sizeof(peer);
    int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &plen);
    if (fd < 0) {
      if (stopping_.load(std::memory_order_acquire)) break;
      continue;  // transient accept failure
    }
    {
      std::lock_guard<std::mutex> lk(clients_mutex_);
      client_fds_.push_back(fd);
    }
    clients_.emplace_back([this, fd] { client_loop(fd); });
  }

  // Graceful teardown, all on this thread. Drain resolves every in-flight
  // verifier check, then the resulting flags go out before sockets close.
  auto final_flags = service_.drain();
  broadcast_flags(final_flags);

  {
    std::lock_guard<std::mutex> lk(clients_mutex_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : clients_) {
    if (t.joinable()) t.join();
  }
  clients_.clear();
  if (flusher_.joinable()) flusher_.join();

  {
    std::lock_guard<std::mutex> lk(clients_mutex_);
    for (int fd : client_fds_) ::close(fd);
    client_fds_.clear();
  }
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void NdjsonServer::flusher_loop() {
  while (!stopping_.load(std::memory_order_acquire)) {
    auto flags = service_.poll_flags();
    if (!flags.empty()) broadcast_flags(flags);
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void NdjsonServer::broadcast_flags(
    const std::vector<protocol::FlagMessage>& flags) {
  if (flags.empty()) return;
  std::vector<int> fds;
  {
    std::lock_guard<std::mutex> lk(clients_mutex_);
    fds = client_fds_;
  }
  for (const auto& flag : flags) {
    std::string line = protocol::encode_flag(flag);
    for (int fd : fds) write_line(fd, line);
  }
}

void NdjsonServer::write_line(int fd, const std::string& line) {
  std::lock_guard<std::mutex> lk(write_mutex_);
  std::string out = line;
  out.push_back('\n');
  std::size_t sent = 0;
  while (sent < out.size()) {
    ssize_t n =
        ::send(fd, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return;  // peer gone; flags for it are simply lost
    sent += static_cast<std::size_t>(n);
  }
}

void NdjsonServer::client_loop(int fd) {
  std::string buffer;
  char chunk[4096];
  while (true) {
    ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));

    std::size_t start = 0;
    while (true) {
      auto nl = buffer.find('\n', start);
      if (nl == std::string::npos) break;
      std::string line = buffer.substr(start, nl - start);
      start = nl + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;

      auto decoded = protocol::decode_message(line);
      if (auto* perr = std::get_if<protocol::ProtocolError>(&decoded)) {
        write_line(fd, protocol::encode_error(*perr));
        continue;
      }
      auto& message = std::get<protocol::EngineMessage>(decoded);

      std::vector<protocol::FlagMessage> flags;
      std::optional<protocol::ProtocolError> err;
      if (auto* reg = std::get_if<protocol::RegisterMessage>(&message)) {
        err = service_.register_sequence(reg->seq, reg->question,
                                         reg->overrides);
      } else if (auto* upd = std::get_if<protocol::UpdateMessage>(&message)) {
        auto result = service_.handle_update(*upd);
        if (auto* e = std::get_if<protocol::ProtocolError>(&result)) {
          err = *e;
        } else {
          flags = std::get<std::vector<protocol::FlagMessage>>(result);
        }
      } else if (auto* cls = std::get_if<protocol::CloseMessage>(&message)) {
        err = service_.close_sequence(cls->seq);
      }

      if (err) {
        write_line(fd, protocol::encode_error(*err));
      } else if (!flags.empty()) {
        for (const auto& flag : flags) {
          write_line(fd, protocol::encode_flag(flag));
        }
      } else {
        write_line(fd, protocol::encode_ack());
      }
    }
    buffer.erase(0, start);
  }
}

}  // namespace trimctl
