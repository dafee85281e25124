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

#include "trimctl/controller.hpp"

namespace trimctl::controller {

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::kThinking:
      return "thinking";
    case Phase::kSummary:
      return "summary";
    case Phase::kDone:
      return "done";
  }
  return "unknown";
}

const char* action_kind_name(ActionKind kind) {
  switch (kind) {
    case ActionKind::kOverthink:
      return "overthink";
    case ActionKind::kUnderthink:
      return "underthink";
    case ActionKind::kRepetition:
      return "repetition";
  }
  return "unknown";
}

namespace {

CompressionAction raise_action(SequenceState& state, ActionKind kind,
                               std::string force_text, ThenMode then_mode) {
  CompressionAction action;
  action.kind = kind;
  action.force_text = std::move(force_text);
  action.then_mode = then_mode;
  action.trigger_token_index = state.tokens_generated;
  state.actions.push_back(action);
  return action;
}

}  // namespace

std::optional<CompressionAction> on_concluded_answer(
    SequenceState& state, const segmenter::ThoughtAnswer& answer,
    const verifier::VerifierVerdict& existence,
    const std::optional<verifier::VerifierVerdict>& equivalence,
    const CompressionConfig& config) {
  if (state.stopped || state.phase != Phase::kThinking) {
    state.stale_verdicts += 1;
    return std::nullopt;
  }

  // Thoughts that never concluded anything leave the agreement chain alone.
  if (!existence.yes) {
    state.verdicts_applied += 1;
    return std::nullopt;
  }

  if (!state.prev_concluded_answer.has_value()) {
    state.verdicts_applied += 1;
    state.prev_concluded_answer = answer;
    state.agree_count = 0;
    return std::nullopt;
  }

  // With a previous answer on record an equivalence verdict is required;
  // without one the event is incomplete and must leave state untouched
  // (fail-open: no fabricated No).
  if (!equivalence.has_value()) return std::nullopt;

  state.verdicts_applied += 1;
  if (equivalence->yes) {
    state.agree_count += 1;
  } else {
    state.agree_count = 0;  // any disagreement restarts the chain here
  }
  state.prev_concluded_answer = answer;

  if (state.agree_count >= config.agreement_threshold) {
    state.stopped = true;
    // The gentle prompt asks the model to finish on its own, so the think
    // phase stays open and generation continues.
    return raise_action(state, ActionKind::kOverthink, config.gentle_prompt,
                        ThenMode::kContinueGeneration);
  }
  return std::nullopt;
}

std::optional<CompressionAction> on_periodic_check(SequenceState& state,
                                                   const CompressionConfig& config) {
  if (state.stopped || state.phase != Phase::kThinking) return std::nullopt;
  const double budget_gate =
      config.budget_pct_threshold / 100.0 * static_cast<double>(config.token_budget);
  if (static_cast<double>(state.tokens_generated) <= budget_gate) return std::nullopt;
  if (state.thoughts_completed <= config.round_threshold) return std::nullopt;
  state.stopped = true;
  state.phase = Phase::kSummary;
  return raise_action(state, ActionKind::kUnderthink, config.forceful_prompt,
                      ThenMode::kContinueGeneration);
}

std::optional<CompressionAction> on_repetition(SequenceState& state,
                                               const repetition::RepetitionReport& report,
                                               const CompressionConfig& config) {
  (void)report;
  switch (state.phase) {
    case Phase::kThinking: {
      // A gentle stop already spent the sequence's one continue-generation
      // flag; a loop after it resolves when the model wraps up.
      if (state.stopped) return std::nullopt;
      state.stopped = true;
      state.phase = Phase::kSummary;
      return raise_action(state, ActionKind::kRepetition, config.forceful_prompt,
                          ThenMode::kContinueGeneration);
    }
    case Phase::kSummary: {
      state.stopped = true;
      return raise_action(state, ActionKind::kRepetition, config.eos_marker,
                          ThenMode::kEmitEos);
    }
    case Phase::kDone:
      return std::nullopt;
  }
  return std::nullopt;
}

void on_marker(SequenceState& state, const segmenter::MarkerSet& markers) {
  if (markers.think_end && state.phase == Phase::kThinking) {
    state.stopped = true;
    state.phase = Phase::kSummary;
  }
  if (markers.eos && state.phase != Phase::kDone) {
    state.stopped = true;
    state.phase = Phase::kDone;
  }
}

}  // namespace trimctl::controller
