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
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trimctl/config.hpp"
#include "trimctl/controller.hpp"
#include "trimctl/verifier.hpp"

namespace trimctl::sim {

class TraceError : public std::runtime_error {
 public:
  explicit TraceError(const std::string& what) : std::runtime_error(what) {}
};

// One reasoning thought as scripted in a trace file. The replayer streams
// `tokens` synthetic tokens for it and attaches `text` plus the trailing
// reflection cue to the batch that finishes the segment, so segmentation
// sees exactly one thought per segment. `token_pattern`, when set, is cycled
// to produce the token ids (this is how repetition loops are scripted);
// otherwise ids are drawn from a seeded generator. The scripted verdict
// fields override the rule-based mock verifier for this segment's answer.
struct TraceSegment {
  std::string text;
  int tokens = 0;
  std::string separator;  // empty: default cue, rotated by the generators
  std::optional<bool> existence;
  std::optional<bool> equiv_to_prev;
  std::vector<std::int32_t> token_pattern;
};

// Replayed after the think phase closes, whether it closed naturally or a
// flag forced it shut. Skipped entirely when a flag ends the sequence.
struct TraceSummary {
  std::string text;
  int tokens = 0;
  std::vector<std::int32_t> token_pattern;
};

struct ReasoningTrace {
  std::string question;
  std::vector<TraceSegment> segments;
  TraceSummary summary;
  double seconds_per_token = 0.0;  // 0: use the sim config default

  long thinking_tokens() const;
  long total_tokens() const;  // thinking + summary
};

// Trace corpus files are JSON: {"version": 1, "traces": [...]}. Malformed
// input raises TraceError with the offending field path in the message.
std::vector<ReasoningTrace> parse_traces(const std::string& json_text);
std::string encode_traces(const std::vector<ReasoningTrace>& traces);
std::vector<ReasoningTrace> load_traces(const std::string& path);
void save_traces(const std::string& path, const std::vector<ReasoningTrace>& traces);

// Canonical token accounting for injected prompt text, used by the replayer
// and pinned by the arithmetic tests: max(1, round(chars / 4)).
int estimate_tokens(const std::string& text);

// ---------------------------------------------------------------------------
// Replay

// Outcome of replaying one trace through the service. Token conservation
// holds by construction and is asserted by tests:
//   tokens_generated + skipped_tokens == baseline_tokens + injected_tokens.
struct SequenceResult {
  std::string sequence_id;
  long tokens_generated = 0;  // tokens the engine actually decoded
  long baseline_tokens = 0;   // full trace length, thinking + summary
  long injected_tokens = 0;   // forced prompt tokens added by flags
  long skipped_tokens = 0;    // scripted tokens never decoded
  int thoughts_completed = 0;
  double duration_seconds = 0.0;
  std::vector<controller::ActionKind> flags;
};

struct RunLog {
  std::vector<SequenceResult> sequences;
};

// Streams every trace through a fresh Service wired to the deterministic
// mock verifier (scripted verdicts honored), one token batch per update
// step. Whether any compression path can fire is decided solely by the
// enable_* switches in `config`; a baseline run is the same call with all
// of them off. Logically single threaded; identical inputs give identical
// logs.
RunLog replay_corpus(const std::vector<ReasoningTrace>& traces, const AppConfig& config);

// Mock engine honoring per-segment scripted verdicts, falling back to the
// rule mock for anything unscripted. Exposed for tests.
std::unique_ptr<verifier::VerifierEngine> make_scripted_engine(
    const std::vector<ReasoningTrace>& traces, const CompressionConfig& config);

// ---------------------------------------------------------------------------
// Metrics

// counts[i] covers [i * bin_width, (i + 1) * bin_width).
struct Histogram {
  long bin_width = 1;
  std::vector<long> counts;
};

struct RunMetrics {
  double runtime_seconds = 0.0;  // makespan on the simulated server
  double tpr_seconds = 0.0;      // mean time per request
  double tpr_t90_seconds = 0.0;  // mean over the fastest 90 percent
  long tokens_total = 0;
  long flags_overthink = 0;
  long flags_underthink = 0;
  long flags_repetition = 0;
  Histogram token_histogram;  // per-sequence generated tokens
  Histogram round_histogram;  // per-sequence completed thoughts
};

// Fixed-width FIFO server model: all requests queued at time zero,
// `sim.concurrency` slots, each request occupies a slot for its duration.
// Request time includes queueing delay.
RunMetrics compute_metrics(const RunLog& log, const SimConfig& sim);

// One header plus one row; stable bytes for fixed input.
std::string metrics_csv(const RunMetrics& metrics);

// One JSON object per line per sequence; parse_run_log_jsonl inverts it.
std::string run_log_jsonl(const RunLog& log);
RunLog parse_run_log_jsonl(const std::string& text);

// Token and round histograms for external plotting; the compressed side is
// omitted when null.
std::string histogram_json(const RunMetrics* baseline, const RunMetrics* compressed);

// Plain-text side-by-side metric table with signed percent deltas.
std::string comparison_text(const RunMetrics& baseline, const RunMetrics& compressed);

struct SimulationOutcome {
  RunLog baseline_log;
  RunLog compressed_log;
  RunMetrics baseline;
  RunMetrics compressed;
};

// Replays the corpus twice, compression off then on, and computes both
// metric sets.
SimulationOutcome run_simulation(const std::vector<ReasoningTrace>& traces,
                                 const AppConfig& config);

// ---------------------------------------------------------------------------
// Deployment sizing

struct CapacityReport {
  long ideal_ratio = 0;      // floor(verifier_rps / reasoner_rps)
  double efficiency = 0.0;   // deployed-accelerator share doing reasoning
};

// efficiency = (deploy_ratio * accel_per_reasoner)
//            / (deploy_ratio * accel_per_reasoner + accel_per_verifier).
CapacityReport capacity_ratio(double reasoner_rps, double verifier_rps,
                              double accel_per_reasoner, double accel_per_verifier,
                              double deploy_ratio);

// ---------------------------------------------------------------------------
// Corpus generators (deterministic for a fixed seed)

struct OverthinkCorpusParams {
  int traces = 20;
  int segments = 10;         // every one concludes the same answer
  int segment_tokens = 500;
  int summary_tokens = 800;
};

struct UnderthinkCorpusParams {
  int traces = 10;
  int segments = 40;         // none conclude
  int segment_tokens = 500;
  int summary_tokens = 800;
};

struct BenignCorpusParams {
  int traces = 15;
  int segments = 5;
  int segment_tokens = 300;
  int summary_tokens = 400;
};

struct RepetitionCorpusParams {
  int traces = 5;
  int segments = 8;
  int segment_tokens = 600;
  int summary_tokens = 700;
  int pattern_segment = 3;  // zero-based segment that starts looping
  std::vector<std::int32_t> pattern = {17, 23};
};

std::vector<ReasoningTrace> gen_overthink_corpus(const OverthinkCorpusParams& params,
                                                 std::uint32_t seed);
std::vector<ReasoningTrace> gen_underthink_corpus(const UnderthinkCorpusParams& params,
                                                  std::uint32_t seed);
std::vector<ReasoningTrace> gen_benign_corpus(const BenignCorpusParams& params,
                                              std::uint32_t seed);
std::vector<ReasoningTrace> gen_repetition_corpus(const RepetitionCorpusParams& params,
                                                  std::uint32_t seed);

// Fixed blend exercising every decision path in one corpus: 20 overthink
// (12 x 500 + 800), 15 benign (5 x 300 + 400), 10 underthink (30 x 180 +
// 600, sized to trip a budget of 8000), 5 repetition (8 x 600 + 700).
std::vector<ReasoningTrace> gen_mixed_corpus(std::uint32_t seed);

// Two hand-written desk-scale traces: a chessboard-counting run that keeps
// re-verifying 204, and an oscillating run that never commits to 475. The
// second scripts every existence verdict to No.
std::vector<ReasoningTrace> exemplar_traces();

}  // namespace trimctl::sim
