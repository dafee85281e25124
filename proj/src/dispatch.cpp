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

#include "trimctl/dispatch.hpp"

#include <utility>

namespace trimctl::verifier {

namespace {

JudgeOutcome dropped_outcome() {
  JudgeOutcome outcome;
  outcome.failure = JudgeFailure::kDropped;
  return outcome;
}

}  // namespace

InlineDispatcher::InlineDispatcher(std::shared_ptr<VerifierEngine> engine)
    : engine_(std::move(engine)) {}

void InlineDispatcher::submit(CheckTicket ticket, CheckRequest request, CompletionFn done) {
  done(ticket, engine_->judge(request));
}

ThreadPoolDispatcher::ThreadPoolDispatcher(std::shared_ptr<VerifierEngine> engine,
                                           std::size_t workers, std::size_t max_pending)
    : engine_(std::move(engine)), max_pending_(max_pending == 0 ? 1 : max_pending) {
  if (workers == 0) workers = 1;
  workers_.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

ThreadPoolDispatcher::~ThreadPoolDispatcher() {
  drain();
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stopping_ = true;
  }
  work_ready_.notify_all();
  for (std::thread& t : workers_) t.join();
}

void ThreadPoolDispatcher::submit(CheckTicket ticket, CheckRequest request,
                                  CompletionFn done) {
  Job shed_job;
  bool shed_incoming = false;
  bool have_shed = false;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (queue_.size() + running_ >= max_pending_) {
      ++shed_;
      if (queue_.empty()) {
        shed_incoming = true;  // all capacity is mid-flight; shed the newcomer
      } else {
        // Prefer shedding the oldest queued equivalence check: agreement
        // pairs re-form on the next conclusion, while an existence verdict
        // is that thought's only chance to enter the chain.
        auto victim = queue_.begin();
        for (auto it = queue_.begin(); it != queue_.end(); ++it) {
          if (it->ticket.kind == VerdictKind::kEquivalence) {
            victim = it;
            break;
          }
        }
        shed_job = std::move(*victim);
        queue_.erase(victim);
        have_shed = true;
      }
    }
    if (!shed_incoming) {
      queue_.push_back({std::move(ticket), std::move(request), std::move(done)});
    }
  }
  // Completions run outside the lock; callers may re-enter submit().
  if (shed_incoming) {
    done(ticket, dropped_outcome());
    return;
  }
  if (have_shed) shed_job.done(shed_job.ticket, dropped_outcome());
  work_ready_.notify_one();
}

void ThreadPoolDispatcher::drain() {
  std::unique_lock<std::mutex> lock(mutex_);
  idle_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
}

std::size_t ThreadPoolDispatcher::pending() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return queue_.size() + running_;
}

std::size_t ThreadPoolDispatcher::shed_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return shed_;
}

void ThreadPoolDispatcher::worker_loop() {
  while (true) {
    Job job;
    {
      std::unique_lock<std::mutex> lock(mutex_);
      work_ready_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping and nothing left
      job = std::move(queue_.front());
      queue_.pop_front();
      ++running_;
    }
    JudgeOutcome outcome = engine_->judge(job.request);
    job.done(job.ticket, std::move(outcome));
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --running_;
    }
    idle_.notify_all();
  }
}

}  // namespace trimctl::verifier
