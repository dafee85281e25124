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

#include "trimctl/sim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <queue>
#include <random>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "json.hpp"
#include "trimctl/dispatch.hpp"
#include "trimctl/segmenter.hpp"
#include "trimctl/service.hpp"

namespace trimctl::sim {

using json = nlohmann::ordered_json;

long ReasoningTrace::thinking_tokens() const {
  long n = 0;
  for (const auto& s : segments) n += s.tokens;
  return n;
}

long ReasoningTrace::total_tokens() const { return thinking_tokens() + summary.tokens; }

int estimate_tokens(const std::string& text) {
  long n = std::lround(static_cast<double>(text.size()) / 4.0);
  return static_cast<int>(std::max<long>(1, n));
}

// ---------------------------------------------------------------------------
// Trace corpus format

namespace {

[[noreturn]] void trace_fail(const std::string& path, const std::string& what) {
  throw TraceError(path + ": " + what);
}

std::vector<std::int32_t> parse_pattern(const json& value, const std::string& path) {
  if (!value.is_array() || value.empty()) {
    trace_fail(path, "must be a non-empty array of token ids");
  }
  std::vector<std::int32_t> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    const auto& item = value[i];
    if (!item.is_number_integer()) {
      trace_fail(path + "[" + std::to_string(i) + "]", "must be an integer");
    }
    auto wide = item.get<std::int64_t>();
    if (wide < 0 || wide > INT32_MAX) {
      trace_fail(path + "[" + std::to_string(i) + "]", "out of token id range");
    }
    out.push_back(static_cast<std::int32_t>(wide));
  }
  return out;
}

int parse_token_count(const json& value, const std::string& path) {
  if (!value.is_number_integer() || value.get<std::int64_t>() < 1 ||
      value.get<std::int64_t>() > INT32_MAX) {
    trace_fail(path, "must be a positive integer");
  }
  return value.get<int>();
}

std::string parse_string(const json& value, const std::string& path) {
  if (!value.is_string()) trace_fail(path, "must be a string");
  return value.get<std::string>();
}

TraceSegment parse_segment(const json& value, const std::string& path) {
  if (!value.is_object()) trace_fail(path, "must be an object");
  TraceSegment seg;
  bool saw_text = false, saw_tokens = false;
  for (const auto& [key, field] : value.items()) {
    const std::string field_path = path + "." + key;
    if (key == "text") {
      seg.text = parse_string(field, field_path);
      saw_text = true;
    } else if (key == "tokens") {
      seg.tokens = parse_token_count(field, field_path);
      saw_tokens = true;
    } else if (key == "separator") {
      seg.separator = parse_string(field, field_path);
    } else if (key == "existence") {
      if (!field.is_boolean()) trace_fail(field_path, "must be a boolean");
      seg.existence = field.get<bool>();
    } else if (key == "equiv_to_prev") {
      if (!field.is_boolean()) trace_fail(field_path, "must be a boolean");
      seg.equiv_to_prev = field.get<bool>();
    } else if (key == "token_pattern") {
      seg.token_pattern = parse_pattern(field, field_path);
    } else {
      trace_fail(field_path, "unknown field");
    }
  }
  if (!saw_text) trace_fail(path + ".text", "missing");
  if (!saw_tokens) trace_fail(path + ".tokens", "missing");
  return seg;
}

TraceSummary parse_summary(const json& value, const std::string& path) {
  if (!value.is_object()) trace_fail(path, "must be an object");
  TraceSummary summary;
  bool saw_text = false, saw_tokens = false;
  for (const auto& [key, field] : value.items()) {
    const std::string field_path = path + "." + key;
    if (key == "text") {
      summary.text = parse_string(field, field_path);
      saw_text = true;
    } else if (key == "tokens") {
      summary.tokens = parse_token_count(field, field_path);
      saw_tokens = true;
    } else if (key == "token_pattern") {
      summary.token_pattern = parse_pattern(field, field_path);
    } else {
      trace_fail(field_path, "unknown field");
    }
  }
  if (!saw_text) trace_fail(path + ".text", "missing");
  if (!saw_tokens) trace_fail(path + ".tokens", "missing");
  return summary;
}

ReasoningTrace parse_trace(const json& value, const std::string& path) {
  if (!value.is_object()) trace_fail(path, "must be an object");
  ReasoningTrace trace;
  bool saw_summary = false;
  for (const auto& [key, field] : value.items()) {
    const std::string field_path = path + "." + key;
    if (key == "question") {
      trace.question = parse_string(field, field_path);
    } else if (key == "segments") {
      if (!field.is_array()) trace_fail(field_path, "must be an array");
      for (std::size_t i = 0; i < field.size(); ++i) {
        trace.segments.push_back(
            parse_segment(field[i], field_path + "[" + std::to_string(i) + "]"));
      }
    } else if (key == "summary") {
      trace.summary = parse_summary(field, field_path);
      saw_summary = true;
    } else if (key == "seconds_per_token") {
      if (!field.is_number() || field.get<double>() < 0.0) {
        trace_fail(field_path, "must be a non-negative number");
      }
      trace.seconds_per_token = field.get<double>();
    } else {
      trace_fail(field_path, "unknown field");
    }
  }
  if (!saw_summary) trace_fail(path + ".summary", "missing");
  return trace;
}

}  // namespace

std::vector<ReasoningTrace> parse_traces(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw TraceError(std::string("trace file: not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw TraceError("trace file: top level must be an object");
  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != 1) {
    throw TraceError("version: missing or unsupported (expected 1)");
  }
  if (!doc.contains("traces") || !doc["traces"].is_array()) {
    throw TraceError("traces: missing or not an array");
  }
  std::vector<ReasoningTrace> out;
  const auto& arr = doc["traces"];
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(parse_trace(arr[i], "traces[" + std::to_string(i) + "]"));
  }
  for (const auto& [key, field] : doc.items()) {
    (void)field;
    if (key != "version" && key != "traces") {
      throw TraceError(key + ": unknown field");
    }
  }
  return out;
}

std::string encode_traces(const std::vector<ReasoningTrace>& traces) {
  json doc;
  doc["version"] = 1;
  json arr = json::array();
  for (const auto& trace : traces) {
    json t;
    t["question"] = trace.question;
    json segs = json::array();
    for (const auto& seg : trace.segments) {
      json s;
      s["text"] = seg.text;
      s["tokens"] = seg.tokens;
      if (!seg.separator.empty()) s["separator"] = seg.separator;
      if (seg.existence) s["existence"] = *seg.existence;
      if (seg.equiv_to_prev) s["equiv_to_prev"] = *seg.equiv_to_prev;
      if (!seg.token_pattern.empty()) s["token_pattern"] = seg.token_pattern;
      segs.push_back(std::move(s));
    }
    t["segments"] = std::move(segs);
    json summary;
    summary["text"] = trace.summary.text;
    summary["tokens"] = trace.summary.tokens;
    if (!trace.summary.token_pattern.empty()) {
      summary["token_pattern"] = trace.summary.token_pattern;
    }
    t["summary"] = std::move(summary);
    if (trace.seconds_per_token > 0.0) {
      t["seconds_per_token"] = trace.seconds_per_token;
    }
    arr.push_back(std::move(t));
  }
  doc["traces"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::vector<ReasoningTrace> load_traces(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(path + ": cannot open");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_traces(buffer.str());
}

void save_traces(const std::string& path, const std::vector<ReasoningTrace>& traces) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TraceError(path + ": cannot open for writing");
  out << encode_traces(traces);
  if (!out) throw TraceError(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Scripted mock engine

namespace {

std::optional<segmenter::ThoughtAnswer> answer_of_segment(
    const TraceSegment& seg, const CompressionConfig& config) {
  segmenter::SubThought thought;
  thought.index = 0;
  thought.text = seg.text;
  thought.too_short = seg.text.size() < config.min_thought_chars;
  return segmenter::extract_answer(thought, config.answer_sentences);
}

// Scripted verdicts key on the extracted answer text, which is exactly the
// content the service later sends for checking. Equivalence keys join the
// two answers with a separator byte and are registered in both orders.
class ScriptedEngine : public verifier::VerifierEngine {
 public:
  ScriptedEngine(const std::vector<ReasoningTrace>& traces,
                 const CompressionConfig& config) {
    for (const auto& trace : traces) {
      std::optional<std::string> prev;
      for (const auto& seg : trace.segments) {
        auto answer = answer_of_segment(seg, config);
        if (!answer) continue;
        if (seg.existence) existence_[answer->text] = *seg.existence;
        bool concluded = seg.existence ? *seg.existence
                                       : verifier::mock_existence(answer->text);
        if (!concluded) continue;
        if (prev && seg.equiv_to_prev) {
          equivalence_[pair_key(*prev, answer->text)] = *seg.equiv_to_prev;
          equivalence_[pair_key(answer->text, *prev)] = *seg.equiv_to_prev;
        }
        prev = answer->text;
      }
    }
  }

  verifier::JudgeOutcome judge(const verifier::CheckRequest& request) override {
    if (request.kind == verifier::VerdictKind::kExistence) {
      auto it = existence_.find(request.content_a);
      if (it != existence_.end()) return scripted(request.kind, it->second);
    } else {
      auto it = equivalence_.find(pair_key(request.content_a, request.content_b));
      if (it != equivalence_.end()) return scripted(request.kind, it->second);
    }
    return fallback_.judge(request);
  }

  const char* name() const override { return "scripted-mock"; }

 private:
  static std::string pair_key(const std::string& a, const std::string& b) {
    return a + '\x1f' + b;
  }

  static verifier::JudgeOutcome scripted(verifier::VerdictKind kind, bool yes) {
    verifier::JudgeOutcome outcome;
    outcome.verdict = verifier::make_verdict(kind, yes ? 1.0 : 0.0, yes ? 0.0 : 1.0,
                                             std::chrono::microseconds{0});
    return outcome;
  }

  std::unordered_map<std::string, bool> existence_;
  std::unordered_map<std::string, bool> equivalence_;
  verifier::RuleMockEngine fallback_;
};

}  // namespace

std::unique_ptr<verifier::VerifierEngine> make_scripted_engine(
    const std::vector<ReasoningTrace>& traces, const CompressionConfig& config) {
  return std::make_unique<ScriptedEngine>(traces, config);
}

// ---------------------------------------------------------------------------
// Replay

namespace {

// Seconds to decode `tokens` tokens, walking the optional length-dependent
// slowdown table. Entry (threshold, secs) applies from that position on.
double decode_seconds(long tokens, double base_spt,
                      const std::vector<std::pair<std::uint64_t, double>>& slowdown) {
  double total = 0.0;
  double current = base_spt;
  std::size_t next = 0;
  for (long i = 0; i < tokens; ++i) {
    while (next < slowdown.size() &&
           static_cast<std::uint64_t>(i) >= slowdown[next].first) {
      current = slowdown[next].second;
      ++next;
    }
    total += current;
  }
  return total;
}

class TraceReplayer {
 public:
  TraceReplayer(Service& service, const ReasoningTrace& trace, std::size_t index,
                const AppConfig& config)
      : service_(service),
        trace_(trace),
        config_(config),
        rng_(0x9E3779B9u ^ static_cast<std::uint32_t>(index)) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "trace-%04zu", index);
    sequence_id_ = buf;
  }

  SequenceResult run() {
    if (auto err = service_.register_sequence(sequence_id_, trace_.question)) {
      throw TraceError(sequence_id_ + ": register failed: " + err->detail);
    }

    stream_thinking();
    if (!ended_) handle_flag_or_finish();

    SequenceResult result;
    result.sequence_id = sequence_id_;
    result.tokens_generated = tokens_sent_;
    result.baseline_tokens = trace_.total_tokens();
    result.injected_tokens = injected_;
    result.skipped_tokens = skipped_;
    result.duration_seconds =
        decode_seconds(tokens_sent_,
                       trace_.seconds_per_token > 0.0 ? trace_.seconds_per_token
                                                      : config_.sim.seconds_per_token,
                       config_.sim.slowdown);
    for (const auto& f : flags_) result.flags.push_back(f.action.kind);

    auto state = service_.sequence_state(sequence_id_);
    if (state) {
      result.thoughts_completed = static_cast<int>(state->thoughts_completed);
      // Cross-check: the service counted exactly what we streamed.
      if (static_cast<long>(state->tokens_generated) != tokens_sent_) {
        throw TraceError(sequence_id_ + ": token accounting diverged");
      }
    }
    service_.close_sequence(sequence_id_);
    return result;
  }

 private:
  // Sends one update. Marker-only updates still need a strictly increasing
  // step, hence the max() against the previous step.
  std::vector<protocol::FlagMessage> send(std::vector<std::int32_t> ids,
                                          std::optional<std::string> text,
                                          segmenter::MarkerSet markers) {
    tokens_sent_ += static_cast<long>(ids.size());
    protocol::UpdateMessage msg;
    msg.seq = sequence_id_;
    msg.step = std::max<std::uint64_t>(static_cast<std::uint64_t>(tokens_sent_),
                                       last_step_ + 1);
    msg.token_ids = std::move(ids);
    msg.text = std::move(text);
    msg.markers = markers;
    last_step_ = msg.step;

    auto outcome = service_.handle_update(msg);
    if (auto* err = std::get_if<protocol::ProtocolError>(&outcome)) {
      throw TraceError(sequence_id_ + ": update rejected: " + err->detail);
    }
    auto flags = std::get<std::vector<protocol::FlagMessage>>(outcome);
    for (const auto& f : flags) flags_.push_back(f);
    return flags;
  }

  std::vector<std::int32_t> make_ids(const std::vector<std::int32_t>& pattern,
                                     int offset, int count) {
    std::vector<std::int32_t> ids;
    ids.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      if (!pattern.empty()) {
        ids.push_back(pattern[static_cast<std::size_t>(offset + i) % pattern.size()]);
      } else {
        ids.push_back(static_cast<std::int32_t>(1000 + rng_() % 100000));
      }
    }
    return ids;
  }

  // Streams one scripted piece in update batches; the text (plus trailing
  // cue) rides on the batch that completes the piece. Returns the remaining
  // token count when a flag interrupts, 0 otherwise.
  int stream_piece(const std::string& text, int tokens,
                   const std::vector<std::int32_t>& pattern, const std::string& cue) {
    const int batch = static_cast<int>(config_.compression.update_interval_steps);
    int sent = 0;
    while (sent < tokens) {
      int n = std::min(batch, tokens - sent);
      bool final_batch = (sent + n == tokens);
      auto flags = send(make_ids(pattern, sent, n),
                        final_batch ? std::optional<std::string>(text + cue)
                                    : std::optional<std::string>(std::string()),
                        {});
      sent += n;
      if (!flags.empty()) return tokens - sent;
    }
    return 0;
  }

  void stream_thinking() {
    for (std::size_t k = 0; k < trace_.segments.size(); ++k) {
      const auto& seg = trace_.segments[k];
      bool last = (k + 1 == trace_.segments.size());
      std::string cue;
      if (!last) cue = seg.separator.empty() ? default_cue(k) : seg.separator;
      int remaining = stream_piece(seg.text, seg.tokens, seg.token_pattern, cue);
      if (!flags_.empty()) {
        skipped_ += remaining;
        for (std::size_t j = k + 1; j < trace_.segments.size(); ++j) {
          skipped_ += trace_.segments[j].tokens;
        }
        return;
      }
    }
  }

  std::string default_cue(std::size_t k) const {
    const auto& cues = config_.compression.reflection_tokens;
    if (cues.empty()) return "\n\nWait";
    return cues[k % cues.size()];
  }

  void stream_summary_and_eos() {
    int remaining = stream_piece(trace_.summary.text, trace_.summary.tokens,
                                 trace_.summary.token_pattern, "");
    if (remaining > 0) {
      // A repetition loop inside the summary ends the sequence outright.
      skipped_ += remaining;
      const auto& action = flags_.back().action;
      if (action.then_mode != controller::ThenMode::kEmitEos) {
        throw TraceError(sequence_id_ + ": unexpected mid-summary flag");
      }
    }
    segmenter::MarkerSet eos;
    eos.eos = true;
    send({}, std::nullopt, eos);
    ended_ = true;
  }

  void handle_flag_or_finish() {
    if (flags_.empty()) {
      // Natural end of the think phase.
      segmenter::MarkerSet think_end;
      think_end.think_end = true;
      send({}, std::nullopt, think_end);
      stream_summary_and_eos();
      return;
    }

    const auto action = flags_.front().action;
    if (action.then_mode == controller::ThenMode::kEmitEos) {
      skipped_ += trace_.summary.tokens;
      segmenter::MarkerSet eos;
      eos.eos = true;
      send({}, std::nullopt, eos);
      ended_ = true;
      return;
    }

    // Forced prompt enters the stream and is decoded like model output. The
    // forceful prompt carries the think-end marker in its text; the gentle
    // prompt leaves the model to close the phase, modeled as an immediate
    // marker update.
    int prompt_tokens = estimate_tokens(action.force_text);
    injected_ += prompt_tokens;
    send(make_ids({}, 0, prompt_tokens), action.force_text, {});
    if (action.kind == controller::ActionKind::kOverthink) {
      segmenter::MarkerSet think_end;
      think_end.think_end = true;
      send({}, std::nullopt, think_end);
    }
    stream_summary_and_eos();
  }

  Service& service_;
  const ReasoningTrace& trace_;
  const AppConfig& config_;
  std::mt19937 rng_;
  std::string sequence_id_;

  long tokens_sent_ = 0;
  long injected_ = 0;
  long skipped_ = 0;
  std::uint64_t last_step_ = 0;
  bool ended_ = false;
  std::vector<protocol::FlagMessage> flags_;
};

}  // namespace

RunLog replay_corpus(const std::vector<ReasoningTrace>& traces, const AppConfig& config) {
  std::shared_ptr<verifier::VerifierEngine> engine =
      make_scripted_engine(traces, config.compression);
  Service service(config, std::make_shared<verifier::InlineDispatcher>(engine));

  RunLog log;
  log.sequences.reserve(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    TraceReplayer replayer(service, traces[i], i, config);
    log.sequences.push_back(replayer.run());
  }
  return log;
}

// ---------------------------------------------------------------------------
// Metrics

RunMetrics compute_metrics(const RunLog& log, const SimConfig& sim) {
  RunMetrics metrics;
  metrics.token_histogram.bin_width =
      static_cast<long>(std::max<std::size_t>(1, sim.histogram_bin_width));
  metrics.round_histogram.bin_width = 1;
  if (log.sequences.empty()) return metrics;

  // Fixed-width FIFO server: every request queued at time zero, each takes a
  // slot for its duration; request time includes the wait for a slot.
  std::size_t width = std::max<std::size_t>(1, sim.concurrency);
  std::priority_queue<double, std::vector<double>, std::greater<double>> slots;
  for (std::size_t i = 0; i < width; ++i) slots.push(0.0);

  std::vector<double> completions;
  completions.reserve(log.sequences.size());
  for (const auto& seq : log.sequences) {
    double start = slots.top();
    slots.pop();
    double done = start + seq.duration_seconds;
    slots.push(done);
    completions.push_back(done);

    metrics.tokens_total += seq.tokens_generated;
    auto token_bin = static_cast<std::size_t>(seq.tokens_generated /
                                              metrics.token_histogram.bin_width);
    if (metrics.token_histogram.counts.size() <= token_bin) {
      metrics.token_histogram.counts.resize(token_bin + 1, 0);
    }
    metrics.token_histogram.counts[token_bin] += 1;
    auto round_bin = static_cast<std::size_t>(std::max(0, seq.thoughts_completed));
    if (metrics.round_histogram.counts.size() <= round_bin) {
      metrics.round_histogram.counts.resize(round_bin + 1, 0);
    }
    metrics.round_histogram.counts[round_bin] += 1;

    for (auto kind : seq.flags) {
      switch (kind) {
        case controller::ActionKind::kOverthink: metrics.flags_overthink += 1; break;
        case controller::ActionKind::kUnderthink: metrics.flags_underthink += 1; break;
        case controller::ActionKind::kRepetition: metrics.flags_repetition += 1; break;
      }
    }
  }

  metrics.runtime_seconds = *std::max_element(completions.begin(), completions.end());
  double sum = 0.0;
  for (double c : completions) sum += c;
  metrics.tpr_seconds = sum / static_cast<double>(completions.size());

  std::sort(completions.begin(), completions.end());
  std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(0.9 * static_cast<double>(completions.size()))));
  double sum90 = 0.0;
  for (std::size_t i = 0; i < keep; ++i) sum90 += completions[i];
  metrics.tpr_t90_seconds = sum90 / static_cast<double>(keep);
  return metrics;
}

std::string metrics_csv(const RunMetrics& metrics) {
  char row[256];
  std::snprintf(row, sizeof(row), "%.6f,%.6f,%.6f,%ld,%ld,%ld,%ld\n",
                metrics.runtime_seconds, metrics.tpr_seconds, metrics.tpr_t90_seconds,
                metrics.tokens_total, metrics.flags_overthink, metrics.flags_underthink,
                metrics.flags_repetition);
  return std::string(
             "Runtime,TPR,TPR_T90,Tokens,Flags_overthink,Flags_underthink,"
             "Flags_repetition\n") +
         row;
}

std::string run_log_jsonl(const RunLog& log) {
  std::string out;
  for (const auto& seq : log.sequences) {
    json line;
    line["seq"] = seq.sequence_id;
    line["tokens"] = seq.tokens_generated;
    line["baseline_tokens"] = seq.baseline_tokens;
    line["injected"] = seq.injected_tokens;
    line["skipped"] = seq.skipped_tokens;
    line["thoughts"] = seq.thoughts_completed;
    line["duration"] = seq.duration_seconds;
    json flags = json::array();
    for (auto kind : seq.flags) flags.push_back(controller::action_kind_name(kind));
    line["flags"] = std::move(flags);
    out += line.dump();
    out += '\n';
  }
  return out;
}

RunLog parse_run_log_jsonl(const std::string& text) {
  RunLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "log line " + std::to_string(line_no);
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw TraceError(where + ": not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw TraceError(where + ": must be an object");
    SequenceResult seq;
    try {
      seq.sequence_id = doc.at("seq").get<std::string>();
      seq.tokens_generated = doc.at("tokens").get<long>();
      seq.baseline_tokens = doc.value("baseline_tokens", seq.tokens_generated);
      seq.injected_tokens = doc.value("injected", 0L);
      seq.skipped_tokens = doc.value("skipped", 0L);
      seq.thoughts_completed = doc.at("thoughts").get<int>();
      seq.duration_seconds = doc.at("duration").get<double>();
      if (doc.contains("flags")) {
        for (const auto& f : doc.at("flags")) {
          std::string name = f.get<std::string>();
          if (name == "overthink") {
            seq.flags.push_back(controller::ActionKind::kOverthink);
          } else if (name == "underthink") {
            seq.flags.push_back(controller::ActionKind::kUnderthink);
          } else if (name == "repetition") {
            seq.flags.push_back(controller::ActionKind::kRepetition);
          } else {
            throw TraceError(where + ": unknown flag kind: " + name);
          }
        }
      }
    } catch (const json::exception& e) {
      throw TraceError(where + ": " + e.what());
    }
    log.sequences.push_back(std::move(seq));
  }
  return log;
}

namespace {

json histogram_to_json(const Histogram& h) {
  json out = json::array();
  for (long c : h.counts) out.push_back(c);
  return out;
}

void pad_to(json& arr, std::size_t n) {
  while (arr.size() < n) arr.push_back(0);
}

}  // namespace

std::string histogram_json(const RunMetrics* baseline, const RunMetrics* compressed) {
  json doc;
  json tokens;
  tokens["bin_width"] = baseline ? baseline->token_histogram.bin_width
                                 : (compressed ? compressed->token_histogram.bin_width : 1);
  json rounds;
  rounds["bin_width"] = 1;

  std::size_t token_bins = 0, round_bins = 0;
  if (baseline) {
    token_bins = std::max(token_bins, baseline->token_histogram.counts.size());
    round_bins = std::max(round_bins, baseline->round_histogram.counts.size());
  }
  if (compressed) {
    token_bins = std::max(token_bins, compressed->token_histogram.counts.size());
    round_bins = std::max(round_bins, compressed->round_histogram.counts.size());
  }
  if (baseline) {
    auto tb = histogram_to_json(baseline->token_histogram);
    pad_to(tb, token_bins);
    tokens["baseline"] = std::move(tb);
    auto rb = histogram_to_json(baseline->round_histogram);
    pad_to(rb, round_bins);
    rounds["baseline"] = std::move(rb);
  }
  if (compressed) {
    auto tc = histogram_to_json(compressed->token_histogram);
    pad_to(tc, token_bins);
    tokens["compressed"] = std::move(tc);
    auto rc = histogram_to_json(compressed->round_histogram);
    pad_to(rc, round_bins);
    rounds["compressed"] = std::move(rc);
  }
  doc["tokens"] = std::move(tokens);
  doc["rounds"] = std::move(rounds);
  return doc.dump(2) + "\n";
}

namespace {

std::string delta_cell(double base, double comp) {
  if (base == 0.0) return "--";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f%%", (comp - base) / base * 100.0);
  return buf;
}

}  // namespace

std::string comparison_text(const RunMetrics& baseline, const RunMetrics& compressed) {
  auto row = [](const char* name, const std::string& b, const std::string& c,
                const std::string& d) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s %16s %16s %10s\n", name, b.c_str(), c.c_str(),
                  d.c_str());
    return std::string(buf);
  };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };

  long base_flags =
      baseline.flags_overthink + baseline.flags_underthink + baseline.flags_repetition;
  long comp_flags = compressed.flags_overthink + compressed.flags_underthink +
                    compressed.flags_repetition;

  std::string out;
  out += row("metric", "baseline", "compressed", "delta");
  out += row("runtime_seconds", fmt(baseline.runtime_seconds),
             fmt(compressed.runtime_seconds),
             delta_cell(baseline.runtime_seconds, compressed.runtime_seconds));
  out += row("tpr_seconds", fmt(baseline.tpr_seconds), fmt(compressed.tpr_seconds),
             delta_cell(baseline.tpr_seconds, compressed.tpr_seconds));
  out += row("tpr_t90_seconds", fmt(baseline.tpr_t90_seconds),
             fmt(compressed.tpr_t90_seconds),
             delta_cell(baseline.tpr_t90_seconds, compressed.tpr_t90_seconds));
  out += row("tokens_total", std::to_string(baseline.tokens_total),
             std::to_string(compressed.tokens_total),
             delta_cell(static_cast<double>(baseline.tokens_total),
                        static_cast<double>(compressed.tokens_total)));
  out += row("flags_total", std::to_string(base_flags), std::to_string(comp_flags), "--");
  return out;
}

SimulationOutcome run_simulation(const std::vector<ReasoningTrace>& traces,
                                 const AppConfig& config) {
  AppConfig baseline_config = config;
  baseline_config.compression.enable_overthink = false;
  baseline_config.compression.enable_underthink = false;
  baseline_config.compression.enable_repetition = false;

  SimulationOutcome outcome;
  outcome.baseline_log = replay_corpus(traces, baseline_config);
  outcome.compressed_log = replay_corpus(traces, config);
  outcome.baseline = compute_metrics(outcome.baseline_log, config.sim);
  outcome.compressed = compute_metrics(outcome.compressed_log, config.sim);
  return outcome;
}

// ---------------------------------------------------------------------------
// Deployment sizing

CapacityReport capacity_ratio(double reasoner_rps, double verifier_rps,
                              double accel_per_reasoner, double accel_per_verifier,
                              double deploy_ratio) {
  CapacityReport report;
  if (reasoner_rps > 0.0) {
    report.ideal_ratio = static_cast<long>(std::floor(verifier_rps / reasoner_rps));
  }
  double reasoning = deploy_ratio * accel_per_reasoner;
  double denom = reasoning + accel_per_verifier;
  report.efficiency = denom > 0.0 ? reasoning / denom : 0.0;
  return report;
}

}  // namespace trimctl::sim
