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

#include "trimctl/service.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

#include "json.hpp"

namespace trimctl {

namespace {

using protocol::ErrorCode;
using protocol::FlagMessage;
using protocol::ProtocolError;
using protocol::UpdateMessage;

std::map<std::int32_t, std::string> load_vocab(const std::string& path) {
  std::map<std::int32_t, std::string> vocab;
  if (path.empty()) return vocab;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open vocab file");
  nlohmann::json root = nlohmann::json::parse(in, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    throw ConfigError(path + ": vocab must be a JSON object of id -> piece");
  }
  for (auto it = root.begin(); it != root.end(); ++it) {
    std::int32_t id = 0;
    try {
      id = static_cast<std::int32_t>(std::stol(it.key()));
    } catch (const std::exception&) {
      throw ConfigError(path + ": vocab key \"" + it.key() + "\" is not an integer");
    }
    if (!it.value().is_string()) {
      throw ConfigError(path + ": vocab value for \"" + it.key() + "\" is not a string");
    }
    vocab[id] = it.value().get<std::string>();
  }
  return vocab;
}

std::shared_ptr<verifier::CheckDispatcher> default_dispatcher(const VerifierConfig& config) {
  auto engine = std::shared_ptr<verifier::VerifierEngine>(verifier::make_engine(config));
  if (config.mode == VerifierMode::kHttp) {
    return std::make_shared<verifier::ThreadPoolDispatcher>(std::move(engine), 4,
                                                            config.max_inflight);
  }
  return std::make_shared<verifier::InlineDispatcher>(std::move(engine));
}

}  // namespace

Service::Session::Session(std::string id, const CompressionConfig& session_config)
    : config(session_config),
      cursor(id, session_config.reflection_tokens, session_config.min_thought_chars),
      detector(session_config.repetition) {
  state.sequence_id = std::move(id);
}

Service::Service(AppConfig config, std::shared_ptr<verifier::CheckDispatcher> dispatcher)
    : config_(std::move(config)),
      templates_(verifier::default_templates()),
      vocab_(load_vocab(config_.service.vocab_path)),
      dispatcher_(dispatcher ? std::move(dispatcher)
                             : default_dispatcher(config_.verifier)),
      completions_(std::make_shared<CompletionQueue>()) {
  templates_.use_shots = config_.verifier.use_shots;
}

Service::~Service() = default;

std::optional<ProtocolError> Service::register_sequence(
    const std::string& sequence_id, const std::string& question,
    const std::map<std::string, std::string>& overrides) {
  CompressionConfig session_config = config_.compression;
  if (!overrides.empty()) {
    AppConfig scratch = config_;
    for (const auto& [key, value] : overrides) {
      try {
        apply_override(scratch, "compression." + key, value);
      } catch (const ConfigError& e) {
        return ProtocolError{ErrorCode::kSchemaError,
                             std::string("overrides: ") + e.what()};
      }
    }
    try {
      validate(scratch);
    } catch (const ConfigError& e) {
      return ProtocolError{ErrorCode::kSchemaError,
                           std::string("overrides: ") + e.what()};
    }
    session_config = scratch.compression;
  }

  std::lock_guard<std::mutex> lock(mutex_);
  if (sessions_.contains(sequence_id)) {
    return ProtocolError{ErrorCode::kDuplicateId,
                         "seq: \"" + sequence_id + "\" is already registered"};
  }
  auto session = std::make_unique<Session>(sequence_id, session_config);
  session->question = question;
  sessions_.emplace(sequence_id, std::move(session));
  return std::nullopt;
}

std::optional<ProtocolError> Service::close_sequence(const std::string& sequence_id) {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = sessions_.find(sequence_id);
  if (it == sessions_.end()) {
    return ProtocolError{ErrorCode::kUnknownSequence,
                         "seq: \"" + sequence_id + "\" is not registered"};
  }
  // In-flight checks for this sequence resolve into nothing and are counted
  // stale when they land.
  sessions_.erase(it);
  return std::nullopt;
}

std::variant<std::vector<FlagMessage>, ProtocolError> Service::handle_update(
    const UpdateMessage& message) {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = sessions_.find(message.seq);
  if (it == sessions_.end()) {
    return ProtocolError{ErrorCode::kUnknownSequence,
                         "seq: \"" + message.seq + "\" is not registered"};
  }
  Session& session = *it->second;
  if (session.has_step && message.step <= session.last_step) {
    stats_.schema_errors += 1;
    return ProtocolError{ErrorCode::kSchemaError,
                         "step: regression (got " + std::to_string(message.step) +
                             ", last " + std::to_string(session.last_step) + ")"};
  }
  session.last_step = message.step;
  session.has_step = true;
  stats_.updates_handled += 1;

  try {
    return handle_update_locked(message, session);
  } catch (const std::exception& e) {
    stats_.internal_errors += 1;
    return ProtocolError{ErrorCode::kInternal, e.what()};
  } catch (...) {
    stats_.internal_errors += 1;
    return ProtocolError{ErrorCode::kInternal, "unknown failure"};
  }
}

std::vector<FlagMessage> Service::handle_update_locked(const UpdateMessage& message,
                                                       Session& session) {
  std::vector<FlagMessage> flags;

  // Token intake: repetition tracking runs in every phase.
  for (const std::int32_t token : message.token_ids) {
    if (session.config.enable_repetition && session.detector.armed()) {
      if (auto report = session.detector.push_token(token, session.token_position)) {
        session.pending_report = report;
      }
    }
    session.token_position += 1;
    session.state.tokens_generated += 1;
  }
  stats_.tokens_ingested += message.token_ids.size();

  // Text intake; every char is processed exactly once.
  const std::string text =
      message.text.has_value() ? *message.text : detokenize(session, message.token_ids);
  session.history.detokenized_chars += text.size();

  segmenter::MarkerSet markers = message.markers;
  const segmenter::MarkerSet detected = segmenter::detect_markers(
      text, session.config.think_end_marker, session.config.eos_marker);
  markers.think_end = markers.think_end || detected.think_end;
  markers.eos = markers.eos || detected.eos;

  ingest_text(session, text, message.token_ids.size(), markers, flags);

  // Controller events, fixed order: markers, repetition, verifier verdicts,
  // then the periodic budget check.
  controller::on_marker(session.state, markers);

  if (session.pending_report.has_value() && !session.repetition_handled &&
      session.config.enable_repetition) {
    session.repetition_handled = true;
    if (auto action = controller::on_repetition(session.state, *session.pending_report,
                                                session.config)) {
      emit_flag(session.state.sequence_id, session, *action, flags);
    }
  }

  drain_completions(flags);

  if (session.config.enable_underthink) {
    if (auto action = controller::on_periodic_check(session.state, session.config)) {
      emit_flag(session.state.sequence_id, session, *action, flags);
    }
  }

  return flags;
}

void Service::ingest_text(Session& session, const std::string& text,
                          std::uint64_t token_count, const segmenter::MarkerSet& markers,
                          std::vector<FlagMessage>& flags) {
  (void)flags;
  if (session.state.phase != controller::Phase::kThinking) return;

  std::string_view think_part = text;
  std::uint64_t think_tokens = token_count;
  if (markers.think_end) {
    const std::size_t pos = text.find(session.config.think_end_marker);
    if (pos != std::string::npos) {
      think_part = std::string_view(text).substr(0, pos);
      think_tokens =
          text.empty() ? 0
                       : static_cast<std::uint64_t>(std::llround(
                             static_cast<double>(token_count) *
                             static_cast<double>(think_part.size()) /
                             static_cast<double>(text.size())));
    }
  }

  const auto thoughts = segmenter::ingest(session.cursor, think_part, think_tokens);
  session.state.thoughts_completed = session.cursor.completed_thoughts;

  // No point scheduling checks for thoughts that end alongside a phase
  // marker or after a stop: their verdicts could only arrive stale.
  const bool schedule = session.config.enable_overthink && !session.state.stopped &&
                        !markers.think_end && !markers.eos;
  if (schedule) {
    for (const segmenter::SubThought& thought : thoughts) {
      if (auto answer = segmenter::extract_answer(thought, session.config.answer_sentences)) {
        session.history.processed_thoughts.push_back(thought.index);
        PendingThought pending;
        pending.thought_index = thought.index;
        pending.answer = *answer;
        session.pipeline.push_back(std::move(pending));
        submit_existence(session, *answer);
      }
    }
  }

  if (markers.think_end) {
    // The trailing fragment is flushed for accounting; the think phase is
    // over, so it is never sent for verification.
    segmenter::close_stream(session.cursor);
  }
}

void Service::submit_existence(Session& session, const segmenter::ThoughtAnswer& answer) {
  stats_.checks_submitted += 1;
  verifier::CheckTicket ticket;
  ticket.sequence_id = session.state.sequence_id;
  ticket.thought_index = answer.thought_index;
  ticket.kind = verifier::VerdictKind::kExistence;

  verifier::CheckRequest request;
  request.kind = verifier::VerdictKind::kExistence;
  request.question = session.question;
  request.content_a = answer.text;
  request.prompt = verifier::build_p1(templates_, session.question, answer.text).text;

  auto pending = &session.pipeline.back();
  pending->existence.status = PendingCheck::Status::kInFlight;

  auto queue = completions_;
  dispatcher_->submit(std::move(ticket), std::move(request),
                      [queue](const verifier::CheckTicket& t, verifier::JudgeOutcome o) {
                        std::lock_guard<std::mutex> lock(queue->mutex);
                        queue->items.push_back({t, std::move(o)});
                      });
}

void Service::drain_completions(std::vector<FlagMessage>& flags) {
  while (true) {
    std::vector<Completion> batch;
    {
      std::lock_guard<std::mutex> lock(completions_->mutex);
      batch.swap(completions_->items);
    }
    if (batch.empty()) return;

    std::vector<std::string> dirty;
    for (Completion& completion : batch) {
      const auto it = sessions_.find(completion.ticket.sequence_id);
      if (it == sessions_.end()) {
        stats_.stale_verdicts += 1;  // sequence closed while the check flew
        continue;
      }
      Session& session = *it->second;
      PendingThought* entry = nullptr;
      for (PendingThought& candidate : session.pipeline) {
        if (candidate.thought_index == completion.ticket.thought_index) {
          entry = &candidate;
          break;
        }
      }
      if (entry == nullptr) {
        stats_.stale_verdicts += 1;
        continue;
      }
      PendingCheck& check = completion.ticket.kind == verifier::VerdictKind::kExistence
                                ? entry->existence
                                : entry->equivalence;
      if (check.status != PendingCheck::Status::kInFlight) {
        stats_.stale_verdicts += 1;
        continue;
      }
      if (completion.outcome.verdict.has_value()) {
        check.status = PendingCheck::Status::kResolved;
        check.verdict = *completion.outcome.verdict;
        if (completion.outcome.token_missing) stats_.token_missing_warnings += 1;
      } else {
        check.status = PendingCheck::Status::kFailed;
        stats_.check_failures += 1;
      }
      if (std::find(dirty.begin(), dirty.end(), completion.ticket.sequence_id) ==
          dirty.end()) {
        dirty.push_back(completion.ticket.sequence_id);
      }
    }

    for (const std::string& sequence_id : dirty) {
      const auto it = sessions_.find(sequence_id);
      if (it == sessions_.end()) continue;
      advance_pipeline(sequence_id, *it->second, flags);
    }
  }
}

void Service::advance_pipeline(const std::string& sequence_id, Session& session,
                               std::vector<FlagMessage>& flags) {
  while (!session.pipeline.empty()) {
    PendingThought& front = session.pipeline.front();

    if (front.existence.status == PendingCheck::Status::kInFlight ||
        front.existence.status == PendingCheck::Status::kNotRequested) {
      return;  // waiting on the existence verdict
    }
    if (front.existence.status == PendingCheck::Status::kFailed) {
      // Fail open: the thought vanishes from the chain as if it had never
      // concluded; agreement state is untouched.
      stats_.checks_discarded += 1;
      session.pipeline.pop_front();
      continue;
    }

    const bool was_live = !session.state.stopped &&
                          session.state.phase == controller::Phase::kThinking;

    if (!front.existence.verdict.yes) {
      controller::on_concluded_answer(session.state, front.answer,
                                      front.existence.verdict, std::nullopt,
                                      session.config);
      session.pipeline.pop_front();
      continue;
    }

    if (!session.state.prev_concluded_answer.has_value()) {
      controller::on_concluded_answer(session.state, front.answer,
                                      front.existence.verdict, std::nullopt,
                                      session.config);
      if (was_live) session.answer_history.push_back(front.answer.text);
      session.pipeline.pop_front();
      continue;
    }

    if (front.equivalence.status == PendingCheck::Status::kNotRequested) {
      // Requested only once this entry reaches the pipeline front, so the
      // previous answer is final and the pair is a true consecutive pair.
      stats_.checks_submitted += 1;
      std::vector<std::string> history = session.answer_history;
      history.push_back(front.answer.text);
      const verifier::CacheSlotPlan plan = verifier::plan_cache_slots(history);

      verifier::CheckTicket ticket;
      ticket.sequence_id = sequence_id;
      ticket.thought_index = front.thought_index;
      ticket.kind = verifier::VerdictKind::kEquivalence;

      verifier::CheckRequest request;
      request.kind = verifier::VerdictKind::kEquivalence;
      request.question = session.question;
      request.content_a = plan.fixed_slot_answer;
      request.content_b = plan.rotating_slot_answer;
      request.prompt = verifier::build_p2(templates_, session.question,
                                          plan.fixed_slot_answer,
                                          plan.rotating_slot_answer)
                           .text;

      front.equivalence.status = PendingCheck::Status::kInFlight;
      auto queue = completions_;
      dispatcher_->submit(std::move(ticket), std::move(request),
                          [queue](const verifier::CheckTicket& t,
                                  verifier::JudgeOutcome o) {
                            std::lock_guard<std::mutex> lock(queue->mutex);
                            queue->items.push_back({t, std::move(o)});
                          });
      return;  // resolution (or failure) re-enters via drain_completions
    }
    if (front.equivalence.status == PendingCheck::Status::kInFlight) return;
    if (front.equivalence.status == PendingCheck::Status::kFailed) {
      stats_.checks_discarded += 1;
      session.pipeline.pop_front();
      continue;
    }

    const auto action = controller::on_concluded_answer(
        session.state, front.answer, front.existence.verdict,
        front.equivalence.verdict, session.config);
    if (was_live) session.answer_history.push_back(front.answer.text);
    if (action.has_value()) emit_flag(sequence_id, session, *action, flags);
    session.pipeline.pop_front();
  }
}

void Service::emit_flag(const std::string& sequence_id, Session& session,
                        const controller::CompressionAction& action,
                        std::vector<FlagMessage>& flags) {
  stats_.flags_issued += 1;
  session.history.issued_flags += 1;
  FlagMessage flag;
  flag.seq = sequence_id;
  flag.action = action;
  flag.step = session.last_step;
  flags.push_back(std::move(flag));
}

std::string Service::detokenize(Session& session, const std::vector<std::int32_t>& token_ids) {
  if (token_ids.empty()) return {};
  session.history.detokenize_calls += 1;
  if (vocab_.empty()) return {};  // token-only updates without a vocab carry no text
  std::string out;
  for (const std::int32_t id : token_ids) {
    const auto it = vocab_.find(id);
    if (it == vocab_.end()) {
      stats_.vocab_misses += 1;
      continue;
    }
    out += it->second;
  }
  return out;
}

std::vector<FlagMessage> Service::poll_flags() {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<FlagMessage> flags;
  drain_completions(flags);
  return flags;
}

std::vector<FlagMessage> Service::drain() {
  dispatcher_->drain();
  return poll_flags();
}

Service::Stats Service::stats() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return stats_;
}

std::size_t Service::session_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return sessions_.size();
}

std::optional<controller::SequenceState> Service::sequence_state(
    const std::string& sequence_id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = sessions_.find(sequence_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second->state;
}

std::optional<StateHistory> Service::state_history(const std::string& sequence_id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = sessions_.find(sequence_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second->history;
}

}  // namespace trimctl
