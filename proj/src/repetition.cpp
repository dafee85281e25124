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

#include "trimctl/repetition.hpp"

#include <algorithm>
#include <cassert>

namespace trimctl::repetition {

namespace {

constexpr std::uint64_t kModulus = (1ULL << 61) - 1;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(prod & kModulus);
  std::uint64_t hi = static_cast<std::uint64_t>(prod >> 61);
  std::uint64_t sum = lo + hi;
  if (sum >= kModulus) sum -= kModulus;
  return sum;
}

std::uint64_t addmod(std::uint64_t a, std::uint64_t b) {
  std::uint64_t sum = a + b;  // both < 2^61, no overflow
  if (sum >= kModulus) sum -= kModulus;
  return sum;
}

std::uint64_t submod(std::uint64_t a, std::uint64_t b) {
  return a >= b ? a - b : a + kModulus - b;
}

// Tokens enter the hash shifted by 1 so id 0 still carries positional weight.
std::uint64_t token_value(std::int32_t token_id) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(token_id)) + 1) % kModulus;
}

}  // namespace

RepetitionDetector::RepetitionDetector(RepetitionConfig config, HashParams hash)
    : config_(config), hash_(hash) {
  assert(config_.period_min >= 1);
  assert(config_.period_max >= config_.period_min);
  assert(config_.window >= 2 * config_.period_max + 2);
  ring_.assign(config_.window, 0);
  periods_.assign(config_.period_max - config_.period_min + 1, {});
  base_pow_.resize(config_.period_max + 1);
  base_pow_[0] = 1;
  const std::uint64_t base = hash_.base % kModulus;
  for (std::size_t p = 1; p <= config_.period_max; ++p) {
    base_pow_[p] = mulmod(base_pow_[p - 1], base);
  }
}

void RepetitionDetector::reset() {
  std::fill(periods_.begin(), periods_.end(), PeriodState{});
  count_ = 0;
  fill_ = 0;
  have_origin_ = false;
  armed_ = true;
}

std::int32_t RepetitionDetector::at(std::uint64_t pos) const {
  return ring_[pos % config_.window];
}

bool RepetitionDetector::confirm_span(std::size_t period, std::size_t span) const {
  // Verifies token[i] == token[i - p] across the span's extension region,
  // which makes the whole span periodic with period p.
  const std::uint64_t end = count_;  // exclusive
  const std::uint64_t begin = end - span;
  for (std::uint64_t i = begin + period; i < end; ++i) {
    if (at(i) != at(i - period)) return false;
  }
  return true;
}

std::optional<RepetitionReport> RepetitionDetector::push_token(std::int32_t token_id,
                                                              std::uint64_t abs_index) {
  if (!have_origin_) {
    origin_ = abs_index;
    have_origin_ = true;
  }
  assert(abs_index == origin_ + count_ && "token indices must be contiguous");

  const std::uint64_t n = count_;  // position of the incoming token
  const std::uint64_t base = hash_.base % kModulus;
  const std::uint64_t x = token_value(token_id);

  for (std::size_t p = config_.period_min; p <= config_.period_max; ++p) {
    PeriodState& st = periods_[p - config_.period_min];

    // Tail block gains the new token; once full it evicts token n-p, which
    // simultaneously enters the previous block, which in turn evicts n-2p.
    st.tail_hash = addmod(mulmod(st.tail_hash, base), x);
    if (n >= p) {
      const std::uint64_t evicted = token_value(at(n - p));
      st.tail_hash = submod(st.tail_hash, mulmod(evicted, base_pow_[p]));
      st.prev_hash = addmod(mulmod(st.prev_hash, base), evicted);
      if (n >= 2 * p) {
        st.prev_hash =
            submod(st.prev_hash, mulmod(token_value(at(n - 2 * p)), base_pow_[p]));
      }
      if (token_id == at(n - p)) {
        // Cap so the span never claims tokens that left the window.
        const std::size_t fill_after = std::min(fill_ + 1, config_.window);
        st.run = std::min(st.run + 1, fill_after - p);
      } else {
        st.run = 0;
      }
    }
  }

  ring_[n % config_.window] = token_id;
  fill_ = std::min(fill_ + 1, config_.window);
  count_ += 1;

#ifndef NDEBUG
  if ((count_ & 0x3ff) == 0) assert(hashes_consistent());
#endif

  if (!armed_) return std::nullopt;

  for (std::size_t p = config_.period_min; p <= config_.period_max; ++p) {
    const PeriodState& st = periods_[p - config_.period_min];
    // run == 0 means span == p, i.e. one period; min_repeats >= 2 rules it out.
    if (st.run == 0) continue;
    const std::size_t span = std::min<std::size_t>(st.run + p, fill_);
    const std::size_t repeats = span / p;
    if (repeats < config_.min_repeats || span < config_.min_span) continue;
    // Hash screen: with both blocks resident the tail must equal the block
    // before it. A mismatch here means the run bookkeeping broke; skip.
    if (count_ >= 2 * p && st.tail_hash != st.prev_hash) continue;
    if (!confirm_span(p, span)) continue;
    armed_ = false;
    return RepetitionReport{p, repeats, abs_index};
  }
  return std::nullopt;
}

bool RepetitionDetector::hashes_consistent() const {
  for (std::size_t p = config_.period_min; p <= config_.period_max; ++p) {
    const PeriodState& st = periods_[p - config_.period_min];
    const std::uint64_t base = hash_.base % kModulus;
    std::uint64_t tail = 0;
    if (count_ >= p) {
      for (std::uint64_t i = count_ - p; i < count_; ++i) {
        tail = addmod(mulmod(tail, base), token_value(at(i)));
      }
    } else {
      for (std::uint64_t i = 0; i < count_; ++i) {
        tail = addmod(mulmod(tail, base), token_value(at(i)));
      }
    }
    if (tail != st.tail_hash) return false;
    if (count_ >= 2 * p) {
      std::uint64_t prev = 0;
      for (std::uint64_t i = count_ - 2 * p; i < count_ - p; ++i) {
        prev = addmod(mulmod(prev, base), token_value(at(i)));
      }
      if (prev != st.prev_hash) return false;
    }
  }
  return true;
}

std::optional<std::pair<std::size_t, std::size_t>> brute_force_period(
    std::span<const std::int32_t> tokens, std::size_t period_min, std::size_t period_max,
    std::size_t min_repeats, std::size_t min_span) {
  const std::size_t n = tokens.size();
  for (std::size_t p = period_min; p <= period_max; ++p) {
    if (p > n) break;
    std::size_t run = 0;
    for (std::size_t i = n; i-- > p;) {
      if (tokens[i] == tokens[i - p]) {
        ++run;
      } else {
        break;
      }
    }
    const std::size_t span = run + p;
    const std::size_t repeats = span / p;
    if (repeats >= min_repeats && span >= min_span) return std::make_pair(p, repeats);
  }
  return std::nullopt;
}

}  // namespace trimctl::repetition
