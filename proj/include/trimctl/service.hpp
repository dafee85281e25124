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
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "trimctl/config.hpp"
#include "trimctl/controller.hpp"
#include "trimctl/dispatch.hpp"
#include "trimctl/protocol.hpp"
#include "trimctl/repetition.hpp"
#include "trimctl/segmenter.hpp"
#include "trimctl/verifier.hpp"

namespace trimctl {

// Per-sequence work ledger: what has already been detokenized, which
// thoughts went to the verifier, which flags went out. Guards against
// processing any span twice.
struct StateHistory {
  std::uint64_t detokenized_chars = 0;  // == stream length at all times
  std::uint64_t detokenize_calls = 0;
  std::vector<std::uint64_t> processed_thoughts;  // indices sent for checks
  std::size_t issued_flags = 0;
};

// The sidecar core. Multiplexes sequences, feeds tokens/text through the
// segmenter and repetition detector, schedules verifier checks through a
// non-blocking dispatcher, and turns controller decisions into flag
// messages. handle_update never waits on verifier I/O: verdicts resolved by
// the time of a call ride back on its flag list, later ones ride on a
// subsequent handle_update or poll_flags.
//
// All entry points are thread-safe; per-sequence event order is preserved.
// Any internal failure is contained: the sequence continues unflagged.
class Service {
 public:
  struct Stats {
    std::uint64_t updates_handled = 0;
    std::uint64_t tokens_ingested = 0;
    std::uint64_t flags_issued = 0;
    std::uint64_t checks_submitted = 0;
    std::uint64_t check_failures = 0;    // timeout + malformed + dropped
    std::uint64_t checks_discarded = 0;  // pipeline entries shed by failures
    std::uint64_t stale_verdicts = 0;    // late/unroutable completions
    std::uint64_t token_missing_warnings = 0;
    std::uint64_t vocab_misses = 0;
    std::uint64_t schema_errors = 0;
    std::uint64_t internal_errors = 0;
  };

  // Uses an inline mock dispatcher when none is given.
  explicit Service(AppConfig config,
                   std::shared_ptr<verifier::CheckDispatcher> dispatcher = nullptr);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::optional<protocol::ProtocolError> register_sequence(
      const std::string& sequence_id, const std::string& question,
      const std::map<std::string, std::string>& overrides = {});
  std::optional<protocol::ProtocolError> close_sequence(const std::string& sequence_id);

  std::variant<std::vector<protocol::FlagMessage>, protocol::ProtocolError> handle_update(
      const protocol::UpdateMessage& message);

  // Collects flags whose verdicts resolved since the last call; never blocks.
  std::vector<protocol::FlagMessage> poll_flags();

  // Waits for in-flight checks, then collects the final flags. For shutdown.
  std::vector<protocol::FlagMessage> drain();

  Stats stats() const;
  std::size_t session_count() const;

  // Test/introspection copies; nullopt for unknown sequences.
  std::optional<controller::SequenceState> sequence_state(const std::string& sequence_id) const;
  std::optional<StateHistory> state_history(const std::string& sequence_id) const;

 private:
  struct PendingCheck {
    enum class Status { kNotRequested, kInFlight, kResolved, kFailed };
    Status status = Status::kNotRequested;
    verifier::VerifierVerdict verdict;
  };

  // One concluded thought moving through existence -> equivalence -> apply.
  struct PendingThought {
    std::uint64_t thought_index = 0;
    segmenter::ThoughtAnswer answer;
    PendingCheck existence;
    PendingCheck equivalence;
  };

  struct Session {
    explicit Session(std::string id, const CompressionConfig& config);

    std::string question;
    CompressionConfig config;  // service defaults + register overrides
    segmenter::StreamCursor cursor;
    repetition::RepetitionDetector detector;
    controller::SequenceState state;
    StateHistory history;
    std::deque<PendingThought> pipeline;
    std::vector<std::string> answer_history;  // applied concluded answers
    std::uint64_t last_step = 0;
    bool has_step = false;
    std::uint64_t token_position = 0;  // absolute index fed to the detector
    std::optional<repetition::RepetitionReport> pending_report;
    bool repetition_handled = false;
  };

  struct Completion {
    verifier::CheckTicket ticket;
    verifier::JudgeOutcome outcome;
  };

  // Callbacks outlive the service teardown window by holding the queue.
  struct CompletionQueue {
    std::mutex mutex;
    std::vector<Completion> items;
  };

  std::vector<protocol::FlagMessage> handle_update_locked(
      const protocol::UpdateMessage& message, Session& session);
  void ingest_text(Session& session, const std::string& text,
                   std::uint64_t token_count, const segmenter::MarkerSet& markers,
                   std::vector<protocol::FlagMessage>& flags);
  void submit_existence(Session& session, const segmenter::ThoughtAnswer& answer);
  void drain_completions(std::vector<protocol::FlagMessage>& flags);
  void advance_pipeline(const std::string& sequence_id, Session& session,
                        std::vector<protocol::FlagMessage>& flags);
  void emit_flag(const std::string& sequence_id, Session& session,
                 const controller::CompressionAction& action,
                 std::vector<protocol::FlagMessage>& flags);
  std::string detokenize(Session& session, const std::vector<std::int32_t>& token_ids);

  AppConfig config_;
  verifier::PromptTemplates templates_;
  std::map<std::int32_t, std::string> vocab_;
  std::shared_ptr<verifier::CheckDispatcher> dispatcher_;
  std::shared_ptr<CompletionQueue> completions_;

  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
  Stats stats_;
};

}  // namespace trimctl
