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

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "trimctl/verifier.hpp"

namespace trimctl::verifier {

// Routing key a completion carries back to its sequence.
struct CheckTicket {
  std::string sequence_id;
  std::uint64_t thought_index = 0;
  VerdictKind kind = VerdictKind::kExistence;
};

using CompletionFn = std::function<void(const CheckTicket&, JudgeOutcome)>;

// Hands checks to a verifier engine off the token path. submit() must never
// block on verifier I/O; completions may arrive on any thread, including
// inside submit() for inline implementations. Every submitted check gets
// exactly one completion, possibly with failure = kDropped.
class CheckDispatcher {
 public:
  virtual ~CheckDispatcher() = default;
  virtual void submit(CheckTicket ticket, CheckRequest request, CompletionFn done) = 0;
  // Blocks until queued and running checks have completed.
  virtual void drain() = 0;
  virtual std::size_t pending() const = 0;
};

// Runs the engine synchronously inside submit(). Only suitable for engines
// with negligible latency (the rule mock, scripted tests); keeps whole-stack
// runs single-threaded and deterministic.
class InlineDispatcher : public CheckDispatcher {
 public:
  explicit InlineDispatcher(std::shared_ptr<VerifierEngine> engine);
  void submit(CheckTicket ticket, CheckRequest request, CompletionFn done) override;
  void drain() override {}
  std::size_t pending() const override { return 0; }

 private:
  std::shared_ptr<VerifierEngine> engine_;
};

// Fixed worker pool over a bounded FIFO. When queued + running checks would
// exceed max_pending, the oldest queued check is shed and completed with
// kDropped (the incoming check itself if nothing is queued), so a slow or
// dead verifier can delay verdicts but never token processing.
class ThreadPoolDispatcher : public CheckDispatcher {
 public:
  ThreadPoolDispatcher(std::shared_ptr<VerifierEngine> engine, std::size_t workers,
                       std::size_t max_pending);
  ~ThreadPoolDispatcher() override;

  void submit(CheckTicket ticket, CheckRequest request, CompletionFn done) override;
  void drain() override;
  std::size_t pending() const override;
  std::size_t shed_count() const;

 private:
  struct Job {
    CheckTicket ticket;
    CheckRequest request;
    CompletionFn done;
  };

  void worker_loop();

  std::shared_ptr<VerifierEngine> engine_;
  std::size_t max_pending_;
  mutable std::mutex mutex_;
  std::condition_variable work_ready_;
  std::condition_variable idle_;
  std::deque<Job> queue_;
  std::size_t running_ = 0;
  std::size_t shed_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace trimctl::verifier
