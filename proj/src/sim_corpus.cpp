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

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "trimctl/sim.hpp"

namespace trimctl::sim {
namespace {

// The six reflection cues the default config segments on. Generated corpora
// rotate through them so every cue gets exercised.
const char* kCues[] = {
    "\n\nWait",    "\n\nBut", "\n\nHowever",
    "\n\nHmm",     "\n\nLet me verify this",
    "\n\nAlternatively",
};
constexpr std::size_t kCueCount = sizeof(kCues) / sizeof(kCues[0]);

std::string cue_for(std::size_t trace_idx, std::size_t seg_idx) {
  return kCues[(trace_idx + seg_idx) % kCueCount];
}

std::string format(const char* fmt, int a, int b = 0) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, a, b);
  return buf;
}

// Thought texts long enough to clear the short-thought gate. Concluding
// texts alternate between prose conclusions and boxed results so both mock
// extraction rules see traffic; non-concluding texts end on plain words and
// avoid every conclusion cue the rule mock looks for.
std::string concluding_text(std::size_t seg_idx, int answer) {
  static const char* kOpeners[] = {
      "Let me redo the computation from the top with fresh variables and slower steps.",
      "I want to double-check the previous step before trusting it any further.",
      "Re-deriving the same quantity along the alternative route as a sanity check.",
      "Going back over the arithmetic once more, term by term, without shortcuts.",
  };
  std::string text = kOpeners[seg_idx % 4];
  text += " Carrying every term through and simplifying carefully lands in the same place. ";
  if (seg_idx % 2 == 0) {
    text += format("So the answer is %d.", answer);
  } else {
    text += format("Everything collapses to \\boxed{%d} once again.", answer);
  }
  return text;
}

std::string wandering_text(std::size_t seg_idx) {
  static const char* kBodies[] = {
      "Trying a different decomposition of the interval; the partial sums drift "
      "and nothing stabilizes into a closed form yet.",
      "This bound still feels loose, and the middle term needs tightening before "
      "any of the cases can be closed out cleanly.",
      "Splitting on parity helps the first half, but the second half picks up a "
      "correction I have not pinned down at all.",
      "The substitution simplifies the numerator while leaving the denominator "
      "worse, so the net progress here is genuinely unclear.",
      "Another pass over the boundary cases turns up the same ambiguity, and the "
      "estimate refuses to settle either way.",
  };
  return kBodies[seg_idx % 5];
}

std::string summary_text(int answer) {
  return format(
      "**Final Answer** The count settles once the last verification holds, giving "
      "\\boxed{%d} as the result.",
      answer);
}

std::string wandering_summary() {
  return "**Final Answer** The best supported value from the partial analysis above "
         "is the tightened central estimate, stated with low confidence.";
}

}  // namespace

std::vector<ReasoningTrace> gen_overthink_corpus(const OverthinkCorpusParams& params,
                                                 std::uint32_t seed) {
  std::vector<ReasoningTrace> traces;
  traces.reserve(static_cast<std::size_t>(params.traces));
  std::mt19937 rng(seed);
  for (int i = 0; i < params.traces; ++i) {
    int answer = 17 + static_cast<int>(rng() % 900);
    ReasoningTrace trace;
    trace.question = format(
        "Problem %d: determine the integer value of the counting expression after "
        "all %d constraints are applied.",
        i + 1, 3 + i % 5);
    for (int j = 0; j < params.segments; ++j) {
      TraceSegment seg;
      seg.text = concluding_text(static_cast<std::size_t>(j), answer);
      seg.tokens = params.segment_tokens;
      seg.separator = cue_for(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      trace.segments.push_back(std::move(seg));
    }
    trace.summary.text = summary_text(answer);
    trace.summary.tokens = params.summary_tokens;
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::vector<ReasoningTrace> gen_underthink_corpus(const UnderthinkCorpusParams& params,
                                                  std::uint32_t seed) {
  std::vector<ReasoningTrace> traces;
  traces.reserve(static_cast<std::size_t>(params.traces));
  std::mt19937 rng(seed + 1);
  for (int i = 0; i < params.traces; ++i) {
    ReasoningTrace trace;
    trace.question = format(
        "Problem %d: evaluate the alternating double sum with %d interleaved index "
        "shifts and state a closed form.",
        i + 1, 2 + static_cast<int>(rng() % 7));
    for (int j = 0; j < params.segments; ++j) {
      TraceSegment seg;
      seg.text = wandering_text(static_cast<std::size_t>(j));
      seg.tokens = params.segment_tokens;
      seg.separator = cue_for(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      trace.segments.push_back(std::move(seg));
    }
    trace.summary.text = wandering_summary();
    trace.summary.tokens = params.summary_tokens;
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::vector<ReasoningTrace> gen_benign_corpus(const BenignCorpusParams& params,
                                              std::uint32_t seed) {
  std::vector<ReasoningTrace> traces;
  traces.reserve(static_cast<std::size_t>(params.traces));
  std::mt19937 rng(seed + 2);
  for (int i = 0; i < params.traces; ++i) {
    ReasoningTrace trace;
    trace.question = format(
        "Problem %d: decide whether the recurrence with offset %d reaches a fixed "
        "point, with justification.",
        i + 1, 1 + static_cast<int>(rng() % 9));
    for (int j = 0; j < params.segments; ++j) {
      TraceSegment seg;
      seg.text = wandering_text(static_cast<std::size_t>(j + 2));
      seg.tokens = params.segment_tokens;
      seg.separator = cue_for(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      trace.segments.push_back(std::move(seg));
    }
    trace.summary.text = wandering_summary();
    trace.summary.tokens = params.summary_tokens;
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::vector<ReasoningTrace> gen_repetition_corpus(const RepetitionCorpusParams& params,
                                                  std::uint32_t seed) {
  std::vector<ReasoningTrace> traces;
  traces.reserve(static_cast<std::size_t>(params.traces));
  std::mt19937 rng(seed + 3);
  for (int i = 0; i < params.traces; ++i) {
    ReasoningTrace trace;
    trace.question = format(
        "Problem %d: simplify the nested radical chain of depth %d to lowest terms.",
        i + 1, 3 + static_cast<int>(rng() % 5));
    for (int j = 0; j < params.segments; ++j) {
      TraceSegment seg;
      seg.text = wandering_text(static_cast<std::size_t>(j + 1));
      seg.tokens = params.segment_tokens;
      seg.separator = cue_for(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      if (j == params.pattern_segment) seg.token_pattern = params.pattern;
      trace.segments.push_back(std::move(seg));
    }
    trace.summary.text = wandering_summary();
    trace.summary.tokens = params.summary_tokens;
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::vector<ReasoningTrace> gen_mixed_corpus(std::uint32_t seed) {
  OverthinkCorpusParams over;
  over.traces = 20;
  over.segments = 12;
  over.segment_tokens = 500;
  over.summary_tokens = 800;
  BenignCorpusParams benign;
  benign.traces = 15;
  benign.segments = 5;
  benign.segment_tokens = 300;
  benign.summary_tokens = 400;
  UnderthinkCorpusParams under;
  under.traces = 10;
  under.segments = 30;
  under.segment_tokens = 180;
  under.summary_tokens = 600;
  RepetitionCorpusParams rep;
  rep.traces = 5;
  rep.segments = 8;
  rep.segment_tokens = 600;
  rep.summary_tokens = 700;

  std::vector<ReasoningTrace> traces = gen_overthink_corpus(over, seed);
  for (auto& t : gen_benign_corpus(benign, seed)) traces.push_back(std::move(t));
  for (auto& t : gen_underthink_corpus(under, seed)) traces.push_back(std::move(t));
  for (auto& t : gen_repetition_corpus(rep, seed)) traces.push_back(std::move(t));

  // Hand-rolled shuffle: std::shuffle's draw sequence is not pinned by the
  // standard, and corpus bytes must be identical everywhere for a seed.
  std::mt19937 rng(seed ^ 0xC0FFEEu);
  for (std::size_t i = traces.size(); i > 1; --i) {
    std::size_t j = rng() % i;
    std::swap(traces[i - 1], traces[j]);
  }
  return traces;
}

std::vector<ReasoningTrace> exemplar_traces() {
  std::vector<ReasoningTrace> traces;

  // A run that finds the right count early and then keeps re-verifying it.
  {
    ReasoningTrace trace;
    trace.question =
        "How many squares of any size can be traced along the grid lines of a "
        "standard 8 by 8 chessboard?";
    TraceSegment derive;
    derive.text =
        "A square of side k fits in 9 minus k positions along each edge, so the "
        "board holds 64 of size one, 49 of size two, and so on down to a single 8 "
        "by 8 square. Adding the eight square numbers from 1 through 64 gives a "
        "running total of 204. So the answer is 204.";
    derive.tokens = 140;
    derive.separator = "\n\nWait";
    trace.segments.push_back(std::move(derive));

    static const char* kChecks[] = {
        "Let me recount the side lengths: eight sizes, with the count shrinking by "
        "one squared each time, still totals 204. So the answer is 204.",
        "Using the pyramidal formula with n as 8: one sixth of 8 times 9 times 17 "
        "is 204 once more. So the answer is 204.",
        "Adding the column 1, 4, 9, 16, 25, 36, 49, 64 from the bottom up also "
        "reaches 204 exactly. So the answer is 204.",
        "Pairing largest with smallest, 64 with 1 and 49 with 4, each pairing "
        "preserves the same running total of 204. So the answer is 204.",
    };
    for (int j = 0; j < 14; ++j) {
      TraceSegment check;
      check.text = kChecks[j % 4];
      check.tokens = 90;
      check.separator = kCues[j % kCueCount];
      trace.segments.push_back(std::move(check));
    }
    trace.summary.text =
        "**Final Answer** Counting every size from 1 by 1 through 8 by 8, the board "
        "contains \\boxed{204} squares.";
    trace.summary.tokens = 120;
    traces.push_back(std::move(trace));
  }

  // A run that keeps circling a candidate value without ever committing.
  // Every existence verdict is scripted to No: the verifier never sees a
  // concluded answer, so only the budget gate can stop this one.
  {
    ReasoningTrace trace;
    trace.question =
        "Count the ordered pairs of distinct integers between 1 and 50 whose "
        "product is a multiple of six.";
    static const char* kLoops[] = {
        "Splitting by residues modulo six suggests the count should land near 475, "
        "but the overlap between the classes is not accounted for yet.",
        "Re-grouping by which factor supplies the two and which supplies the three "
        "pushes the estimate toward 457 instead, so one of the groupings is off.",
        "Inclusion and exclusion over the residue classes brings it back toward "
        "475, yet the diagonal pairs may have been counted twice somewhere.",
        "Checking a smaller board of 1 through 10 by hand does not scale the way "
        "either candidate predicts, so the scaling argument itself is suspect.",
    };
    for (int j = 0; j < 24; ++j) {
      TraceSegment seg;
      seg.text = kLoops[j % 4];
      seg.tokens = 120;
      seg.separator = kCues[(j + 1) % kCueCount];
      seg.existence = false;
      trace.segments.push_back(std::move(seg));
    }
    trace.summary.text =
        "**Final Answer** After settling the overlap correction the count comes out "
        "to \\boxed{475}.";
    trace.summary.tokens = 100;
    traces.push_back(std::move(trace));
  }

  return traces;
}

}  // namespace trimctl::sim
