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

// Verifier engines with scripted failure behavior, shared by the service
// tests and the acceptance checks.

#pragma once

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "trimctl/verifier.hpp"

namespace trimctl_test {

using trimctl::verifier::CheckRequest;
using trimctl::verifier::JudgeFailure;
using trimctl::verifier::JudgeOutcome;
using trimctl::verifier::RuleMockEngine;
using trimctl::verifier::VerdictKind;
using trimctl::verifier::VerifierEngine;

// Every check fails the same way; the token path must not care.
class AlwaysFailEngine : public VerifierEngine {
 public:
  explicit AlwaysFailEngine(JudgeFailure failure) : failure_(failure) {}
  JudgeOutcome judge(const CheckRequest&) override {
    calls_ += 1;
    JudgeOutcome out;
    out.failure = failure_;
    return out;
  }
  const char* name() const override { return "always-fail"; }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  JudgeFailure failure_;
  std::atomic<std::uint64_t> calls_{0};
};

// Checks of one kind fail; the other kind gets the rule-mock verdict.
class FailKindEngine : public VerifierEngine {
 public:
  FailKindEngine(VerdictKind fail_kind, JudgeFailure failure)
      : fail_kind_(fail_kind), failure_(failure) {}
  JudgeOutcome judge(const CheckRequest& request) override {
    if (request.kind == fail_kind_) {
      JudgeOutcome out;
      out.failure = failure_;
      return out;
    }
    return inner_.judge(request);
  }
  const char* name() const override { return "fail-kind"; }

 private:
  VerdictKind fail_kind_;
  JudgeFailure failure_;
  RuleMockEngine inner_;
};

// Every period-th check fails, cycling through the failure kinds; the rest
// get the rule-mock verdict. Deterministic for a fixed call order.
class FlakyEngine : public VerifierEngine {
 public:
  explicit FlakyEngine(std::uint64_t period) : period_(period == 0 ? 1 : period) {}
  JudgeOutcome judge(const CheckRequest& request) override {
    const std::uint64_t n = calls_.fetch_add(1);
    if (n % period_ == period_ - 1) {
      JudgeOutcome out;
      switch ((n / period_) % 3) {
        case 0:
          out.failure = JudgeFailure::kTimeout;
          break;
        case 1:
          out.failure = JudgeFailure::kMalformed;
          break;
        default:
          out.failure = JudgeFailure::kDropped;
          break;
      }
      return out;
    }
    return inner_.judge(request);
  }
  const char* name() const override { return "flaky"; }

 private:
  std::uint64_t period_;
  std::atomic<std::uint64_t> calls_{0};
  RuleMockEngine inner_;
};

// judge() blocks until released; lets tests hold checks in flight.
class BlockingEngine : public VerifierEngine {
 public:
  JudgeOutcome judge(const CheckRequest& request) override {
    {
      std::unique_lock<std::mutex> lock(mutex_);
      entered_ += 1;
      entered_cv_.notify_all();
      release_cv_.wait(lock, [&] { return released_; });
    }
    return inner_.judge(request);
  }
  const char* name() const override { return "blocking"; }

  void wait_entered(std::size_t n) {
    std::unique_lock<std::mutex> lock(mutex_);
    entered_cv_.wait(lock, [&] { return entered_ >= n; });
  }
  void release() {
    std::lock_guard<std::mutex> lock(mutex_);
    released_ = true;
    release_cv_.notify_all();
  }

 private:
  std::mutex mutex_;
  std::condition_variable entered_cv_;
  std::condition_variable release_cv_;
  std::size_t entered_ = 0;
  bool released_ = false;
  RuleMockEngine inner_;
};

// Rule-mock behavior with a fixed per-check delay, for throughput isolation.
class SlowEngine : public VerifierEngine {
 public:
  explicit SlowEngine(std::chrono::milliseconds delay) : delay_(delay) {}
  JudgeOutcome judge(const CheckRequest& request) override {
    std::this_thread::sleep_for(delay_);
    return inner_.judge(request);
  }
  const char* name() const override { return "slow"; }

 private:
  std::chrono::milliseconds delay_;
  RuleMockEngine inner_;
};

}  // namespace trimctl_test
