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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "trimctl/config.hpp"

namespace trimctl::repetition {

struct RepetitionReport {
  std::size_t period = 0;
  // Full periods covered by the trailing periodic span at fire time.
  std::size_t repeats = 0;
  // Absolute index of the token whose arrival completed the span.
  std::uint64_t end_position = 0;
};

// Polynomial rolling-hash parameters. The modulus is fixed (2^61 - 1); the
// base is injectable so tests can force collisions and verify that direct
// comparison, not hash equality, decides reports.
struct HashParams {
  std::uint64_t base = 0x100000001b3ULL;
};

// Streaming detector for trailing token loops with period in
// [period_min, period_max]. Per push it does O(period_max) work: for each
// tracked period it rolls two block hashes (the last p tokens, and the p
// before those) and extends a trailing match run by one direct comparison
// against the token one period back. A report fires when the periodic span
// reaches min_repeats full periods and min_span tokens; block-hash equality
// and a direct whole-span comparison both confirm before reporting, so a
// report is never hash-luck. Smallest qualifying period wins. After one
// report the detector disarms until reset().
class RepetitionDetector {
 public:
  explicit RepetitionDetector(RepetitionConfig config, HashParams hash = {});

  // Feeds one token. abs_index must increase by exactly 1 per call (the
  // first call fixes the origin). Returns a report at most once per armed
  // episode.
  std::optional<RepetitionReport> push_token(std::int32_t token_id, std::uint64_t abs_index);

  // Rearms and clears all window/hash/run state.
  void reset();

  bool armed() const { return armed_; }
  std::uint64_t tokens_seen() const { return count_; }

  // Recomputes every tracked block hash from the ring and compares with the
  // incrementally maintained values. Test hook; also run periodically in
  // debug builds.
  bool hashes_consistent() const;

 private:
  struct PeriodState {
    std::uint64_t tail_hash = 0;  // hash of the last p tokens
    std::uint64_t prev_hash = 0;  // hash of the p tokens before those
    std::size_t run = 0;          // trailing i where token[i] == token[i-p]
  };

  std::int32_t at(std::uint64_t pos) const;  // ring access by absolute position
  bool confirm_span(std::size_t period, std::size_t span) const;

  RepetitionConfig config_;
  HashParams hash_;
  std::vector<std::int32_t> ring_;
  std::vector<PeriodState> periods_;
  std::vector<std::uint64_t> base_pow_;  // base^p for each tracked p
  std::uint64_t count_ = 0;              // tokens pushed since reset
  std::size_t fill_ = 0;                 // valid ring entries, <= window
  std::uint64_t origin_ = 0;             // abs_index of the first push
  bool have_origin_ = false;
  bool armed_ = true;
};

// Reference oracle: exhaustive scan for the smallest period whose trailing
// periodic span satisfies the same gates the detector uses. Returns
// (period, full repeats) or nullopt. O(period_max * n); for tests and
// offline checks only.
std::optional<std::pair<std::size_t, std::size_t>> brute_force_period(
    std::span<const std::int32_t> tokens, std::size_t period_min, std::size_t period_max,
    std::size_t min_repeats, std::size_t min_span = 0);

}  // namespace trimctl::repetition
