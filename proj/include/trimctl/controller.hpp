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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trimctl/config.hpp"
#include "trimctl/repetition.hpp"
#include "trimctl/segmenter.hpp"
#include "trimctl/verifier.hpp"

namespace trimctl::controller {

enum class Phase { kThinking, kSummary, kDone };

const char* phase_name(Phase phase);

enum class ActionKind {
  kOverthink,   // answers converged; nudge the model to wrap up
  kUnderthink,  // budget gate tripped; force the think phase closed
  kRepetition,  // token loop; force think closed, or end the sequence when
                // it happens during the summary (then_mode = kEmitEos)
};

const char* action_kind_name(ActionKind kind);

enum class ThenMode { kContinueGeneration, kEmitEos };

// One intervention for the serving engine: force `force_text` into the
// stream, then either keep decoding or end the sequence.
struct CompressionAction {
  ActionKind kind = ActionKind::kOverthink;
  std::string force_text;
  ThenMode then_mode = ThenMode::kContinueGeneration;
  std::uint64_t trigger_token_index = 0;  // tokens generated when it fired
};

// Per-sequence controller state. Owned by the service session; the event
// functions below are its only writers.
struct SequenceState {
  std::string sequence_id;
  std::uint64_t tokens_generated = 0;
  std::size_t thoughts_completed = 0;

  // Agreement tracking across concluded answers.
  std::optional<segmenter::ThoughtAnswer> prev_concluded_answer;
  std::size_t agree_count = 0;

  // Once stopped, no further intervention fires and late verdicts are stale.
  bool stopped = false;
  Phase phase = Phase::kThinking;

  std::vector<CompressionAction> actions;  // every action raised, in order

  // Counters surfaced through service stats.
  std::size_t stale_verdicts = 0;
  std::size_t verdicts_applied = 0;
};

// Applies the verdicts for one concluded answer, oldest thought first.
// A No existence verdict leaves agreement state untouched. A Yes existence
// verdict with no previous answer seeds the agreement chain (no equivalence
// verdict expected); otherwise the equivalence verdict extends the chain
// (Yes) or restarts it at this answer (No). Once the chain reaches
// agreement_threshold the overthink action fires: gentle prompt, generation
// continues, sequence marked stopped. Verdicts arriving after a stop are
// counted stale and ignored.
std::optional<CompressionAction> on_concluded_answer(
    SequenceState& state, const segmenter::ThoughtAnswer& answer,
    const verifier::VerifierVerdict& existence,
    const std::optional<verifier::VerifierVerdict>& equivalence,
    const CompressionConfig& config);

// Budget gate, evaluated once per update batch: fires the underthink action
// when tokens_generated strictly exceeds budget_pct_threshold percent of
// token_budget AND thoughts_completed strictly exceeds round_threshold AND
// the sequence is not already stopped. The forceful prompt closes the think
// phase, so the phase moves to summary.
std::optional<CompressionAction> on_periodic_check(SequenceState& state,
                                                   const CompressionConfig& config);

// Token-loop response. While thinking: forceful prompt, think phase closed.
// While summarizing: emit the end-of-sequence marker. Ignored once the
// sequence is done, or while thinking after a gentle stop already spent the
// sequence's single continue-generation flag.
std::optional<CompressionAction> on_repetition(SequenceState& state,
                                               const repetition::RepetitionReport& report,
                                               const CompressionConfig& config);

// Engine-reported phase transitions; idempotent. Think-end stops further
// intervention and moves to summary; end-of-sequence moves to done.
void on_marker(SequenceState& state, const segmenter::MarkerSet& markers);

}  // namespace trimctl::controller
