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

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "trimctl/service.hpp"

namespace trimctl {

// NDJSON-over-TCP front end for a Service. One request line yields one
// response line (ack or error) or one line per ready flag; flags resolving
// between client lines are flushed by a background thread. Shutdown drains
// in-flight verifier checks and flushes their flags before connections
// close, so no decided flag is lost.
class NdjsonServer {
 public:
  NdjsonServer(Service& service, std::string bind_address);
  ~NdjsonServer();

  NdjsonServer(const NdjsonServer&) = delete;
  NdjsonServer& operator=(const NdjsonServer&) = delete;

  // Binds and listens; returns false (with message to stderr) on failure.
  // on_ready is called once with the actual "host:port" (useful when the
  // requested port is 0).
  bool start(const std::function<void(const std::string&)>& on_ready = nullptr);

  // Accept loop plus full graceful teardown; returns once every connection
  // and worker thread has been reaped after request_stop().
  void run();

  // Async-signal-safe stop request: flips the flag and closes the listener
  // so run() can unwind. Safe to call from a signal handler.
  void request_stop();

  std::uint16_t port() const { return port_; }

 private:
  void client_loop(int fd);
  void flusher_loop();
  void write_line(int fd, const std::string& line);
  void broadcast_flags(const std::vector<protocol::FlagMessage>& flags);

  Service& service_;
  std::string bind_address_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread flusher_;

  std::mutex write_mutex_;            // serializes whole response lines
  std::mutex clients_mutex_;          // guards client_fds_
  std::vector<int> client_fds_;
  std::vector<std::thread> clients_;  // touched only by the run() thread
};

}  // namespace trimctl
