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

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trimctl/config.hpp"

namespace trimctl::verifier {

// The two checks run against a concluded answer: does it actually conclude
// anything, and does it agree with the previous conclusion.
enum class VerdictKind { kExistence, kEquivalence };

const char* verdict_kind_name(VerdictKind kind);

struct VerifierVerdict {
  VerdictKind kind = VerdictKind::kExistence;
  bool yes = false;
  double p_yes = 0.0;
  double p_no = 0.0;
  std::chrono::microseconds latency{0};
};

// yes iff p_yes strictly exceeds p_no; a tie is No.
VerifierVerdict make_verdict(VerdictKind kind, double p_yes, double p_no,
                             std::chrono::microseconds latency);

// ---------------------------------------------------------------------------
// Prompt templates

// Worked example for the conclusion-existence prompt.
struct ExistenceShot {
  std::string question;
  std::string content;
  std::string label;  // "Yes" or "No"
};

// Worked example for the answer-equivalence prompt. Label strings for the
// two answer slots are per-shot so defaults can be reproduced exactly.
struct EquivalenceShot {
  std::string question;
  std::string answer_1;
  std::string answer_2;
  std::string label;
  std::string label_1 = "Answer 1:";
  std::string label_2 = "Answer 2:";
};

struct PromptTemplates {
  std::string existence_header;
  std::vector<ExistenceShot> existence_shots;
  std::string equivalence_header;
  std::vector<EquivalenceShot> equivalence_shots;
  bool use_shots = true;
};

// Shipped headers and worked examples.
PromptTemplates default_templates();

struct VerifierPromptP1 {
  std::string text;
};
struct VerifierPromptP2 {
  std::string text;
};

// Renders the existence check: header, numbered examples (when use_shots),
// then the question and content. Always ends with "[Yes/No]:".
VerifierPromptP1 build_p1(const PromptTemplates& templates, std::string_view question,
                          std::string_view content);

// Renders the equivalence check over two answers to the same question.
// Always ends with "[Yes/No]:".
VerifierPromptP2 build_p2(const PromptTemplates& templates, std::string_view question,
                          std::string_view answer_1, std::string_view answer_2);

// ---------------------------------------------------------------------------
// Prefix-cache slot planning

// Slot assignment for the next equivalence check. Answers are checked in
// overlapping pairs (1,2), (2,3), (3,4)...; keeping each triplet's middle
// answer in the fixed prompt slot means only the rotating slot changes
// between that triplet's two checks, so the serving engine can reuse the
// cached prompt prefix on the second one.
struct CacheSlotPlan {
  std::string fixed_slot_answer;     // fills the first answer placeholder
  std::string rotating_slot_answer;  // fills the second answer placeholder
  bool reuse_prefix = false;
};

// Plans the check between the last two answers in the history (size >= 2).
// Pair k (1-based) pins answer k+1 into the fixed slot when k is odd and
// answer k when k is even, e.g. [a,b,c] renders as (b,a) then (b,c).
CacheSlotPlan plan_cache_slots(std::span<const std::string> answer_history);

// ---------------------------------------------------------------------------
// Verdict extraction from completion logprobs

enum class JudgeFailure { kTimeout, kMalformed, kDropped };

const char* judge_failure_name(JudgeFailure failure);

// A check either produced a verdict or failed; never both. token_missing
// marks responses whose top-K contained no Yes/No variant at all (verdict is
// No with zero mass, and the caller should count the anomaly).
struct JudgeOutcome {
  std::optional<VerifierVerdict> verdict;
  std::optional<JudgeFailure> failure;
  bool token_missing = false;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

// Folds a completion's next-token top-K into a verdict: probability mass is
// summed over every variant that reads "yes"/"no" after stripping leading
// whitespace or the wordpiece space markers (Ġ, ▁) and lowercasing.
JudgeOutcome verdict_from_logprobs(VerdictKind kind, std::span<const TokenLogprob> top,
                                   std::chrono::microseconds latency);

// ---------------------------------------------------------------------------
// Engines

struct CheckRequest {
  VerdictKind kind = VerdictKind::kExistence;
  std::string question;
  std::string content_a;  // thought content (p1) or answer 1 (p2)
  std::string content_b;  // answer 2 (p2 only)
  std::string prompt;     // rendered prompt actually sent
};

class VerifierEngine {
 public:
  virtual ~VerifierEngine() = default;
  virtual JudgeOutcome judge(const CheckRequest& request) = 0;
  virtual const char* name() const = 0;
};

// ---------------------------------------------------------------------------
// Deterministic mock rules (frozen; see the function docs for the rules)

// True when the content looks concluded: contains "answer is" (case
// insensitive), "= ", or "\boxed{", or its final word is a number, a number
// word (zero..ninety-nine composed forms), or an option letter A-E.
bool mock_existence(std::string_view content);

// Candidate final answer: the last \boxed{...} body if present, else the
// last number/number-word/option-letter word. Canonicalized (number words to
// digits, fractions reduced, trailing zeros trimmed, letters uppercased);
// empty when nothing qualifies.
std::string extract_candidate_answer(std::string_view content);

// True when both candidate answers canonicalize to the same value; when
// either side has no candidate, falls back to a whitespace/case-insensitive
// comparison of the full texts.
bool mock_equivalent(std::string_view answer_1, std::string_view answer_2);

// Rule-based verdict with p in {0,1}; same shape as a live judgement.
VerifierVerdict mock_judge(VerdictKind kind, std::string_view question,
                           std::string_view content_a, std::string_view content_b = {});

// Engine wrapper over mock_judge; zero latency, never fails.
class RuleMockEngine : public VerifierEngine {
 public:
  JudgeOutcome judge(const CheckRequest& request) override;
  const char* name() const override { return "mock"; }
};

// Engine speaking an OpenAI-compatible completions endpoint: one POST per
// check with max_tokens=1 and top-K logprobs, verdict folded from the first
// generated token's candidates. Network errors surface as kTimeout, protocol
// surprises as kMalformed; it never throws into the caller.
std::unique_ptr<VerifierEngine> make_http_engine(const VerifierConfig& config);

// Builds an engine for the configured mode.
std::unique_ptr<VerifierEngine> make_engine(const VerifierConfig& config);

}  // namespace trimctl::verifier
