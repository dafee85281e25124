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

#include "trimctl/verifier.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <sstream>

namespace trimctl::verifier {

const char* verdict_kind_name(VerdictKind kind) {
  switch (kind) {
    case VerdictKind::kExistence:
      return "existence";
    case VerdictKind::kEquivalence:
      return "equivalence";
  }
  return "unknown";
}

const char* judge_failure_name(JudgeFailure failure) {
  switch (failure) {
    case JudgeFailure::kTimeout:
      return "timeout";
    case JudgeFailure::kMalformed:
      return "malformed";
    case JudgeFailure::kDropped:
      return "dropped";
  }
  return "unknown";
}

VerifierVerdict make_verdict(VerdictKind kind, double p_yes, double p_no,
                             std::chrono::microseconds latency) {
  VerifierVerdict v;
  v.kind = kind;
  v.p_yes = p_yes;
  v.p_no = p_no;
  v.yes = p_yes > p_no;
  v.latency = latency;
  return v;
}

// ---------------------------------------------------------------------------
// Prompt templates

PromptTemplates default_templates() {
  PromptTemplates t;
  t.existence_header =
      "Check if the following sentences from a reasoning model reach a conclusion, "
      "regardless of formatting or phrasing, and solve the question. Return 'Yes' if "
      "the content finds a solution, otherwise 'No'. Return only 'Yes' or 'No' with "
      "no explanation.";

  const std::string kSumQuestion = "2 + 3 = ?";
  const std::string kFracQuestion =
      "If f(x) = \\frac{3x-2}{x-2}, what is the value of f(-2) + f(-1) + f(0)? "
      "Express your answer as a common fraction.";
  t.existence_shots = {
      {kSumQuestion, "The answer is 5.", "Yes"},
      {kSumQuestion, "I think it should be 5, but I am not sure.", "Yes"},
      {kSumQuestion, "Wait, I think I made a mistake.", "Yes"},
      {kFracQuestion,
       "6 + 5 is 11, and 11 + 3 is 14. Yes, so \\frac{14}{3}. So, f(-2) + f(-1) + "
       "f(0) = \\frac{14}{3}.",
       "Yes"},
      {kFracQuestion,
       "Since all denominators are 3, we can add the numerators: 6 + 5 + 3 = 14. "
       "Therefore, the sum is \\frac{14}{3}.",
       "Yes"},
      {kFracQuestion,
       "Wait, another thought: When adding the fractions, is \\frac{14}{3} the "
       "correct sum? Let's compute it in decimal to cross-verify. \\frac{14}{3} "
       "divided is approximately 4.666...",
       "No"},
  };

  t.equivalence_header =
      "Check if the two answers provided are logically or mathematically equivalent, "
      "regardless of formatting or phrasing. Return 'Yes' if they are equal in "
      "meaning/value and a valid solution to the question, otherwise 'No'. Return "
      "only 'Yes' or 'No' with no explanation.";

  EquivalenceShot shot1;
  shot1.question = kSumQuestion;
  shot1.answer_1 = "the answer is 5.";
  shot1.answer_2 = "the answer seems to be five.";
  shot1.label = "Yes";
  shot1.label_1 = "Answer1:";
  shot1.label_2 = "Answer2:";

  EquivalenceShot shot2;
  shot2.question =
      "Define p = \\sum_{k = 1}^\\infty \\frac{1}{k^2} and q = \\sum_{k = 1}^\\infty "
      "\\frac{1}{k^3}. Find a way to write \\sum_{j = 1}^\\infty \\sum_{k = "
      "1}^\\infty \\frac{1}{(j + k)^3} in terms of p and q.";
  shot2.answer_1 =
      "(p - 1) - (q - 1) = p - 1 - q + 1 = p - q\nTherefore, the original double sum "
      "is equal to p - q.";
  shot2.answer_2 =
      "Given that the terms are decreasing and positive, the convergence seems "
      "plausible. However, since p - q ≈ 0.4429 and our partial sum is about "
      "0.3513, it's possible that the analytical result is correct. Therefore, "
      "unless there's a mistake in the analytical steps, the answer should be p - q.";
  shot2.label = "Yes";

  t.equivalence_shots = {shot1, shot2};
  return t;
}

VerifierPromptP1 build_p1(const PromptTemplates& templates, std::string_view question,
                          std::string_view content) {
  std::string out;
  out += templates.existence_header;
  out += "\n\n";
  if (templates.use_shots) {
    for (std::size_t i = 0; i < templates.existence_shots.size(); ++i) {
      const ExistenceShot& shot = templates.existence_shots[i];
      out += "Example " + std::to_string(i + 1) + ":\n\n";
      out += "Question: " + shot.question + "\n\n";
      out += "Content: " + shot.content + "\n\n";
      out += "You should return " + shot.label + ".\n\n";
    }
  }
  out += "Question: ";
  out += question;
  out += "\n\nContent: ";
  out += content;
  out += "\n\n[Yes/No]:";
  return VerifierPromptP1{std::move(out)};
}

VerifierPromptP2 build_p2(const PromptTemplates& templates, std::string_view question,
                          std::string_view answer_1, std::string_view answer_2) {
  std::string out;
  out += templates.equivalence_header;
  out += "\n\n";
  if (templates.use_shots) {
    for (std::size_t i = 0; i < templates.equivalence_shots.size(); ++i) {
      const EquivalenceShot& shot = templates.equivalence_shots[i];
      out += "Example " + std::to_string(i + 1) + ":\n\n";
      out += "Question: " + shot.question + "\n\n";
      out += shot.label_1 + " " + shot.answer_1 + "\n\n";
      out += shot.label_2 + " " + shot.answer_2 + "\n\n";
      out += "Are they equivalent?\n[Yes/No]: " + shot.label + "\n\n";
    }
  }
  out += "Question: ";
  out += question;
  out += "\n\nAnswer 1: ";
  out += answer_1;
  out += "\n\nAnswer 2: ";
  out += answer_2;
  out += "\n\nAre they equivalent?\n[Yes/No]:";
  return VerifierPromptP2{std::move(out)};
}

// ---------------------------------------------------------------------------
// Prefix-cache slot planning

CacheSlotPlan plan_cache_slots(std::span<const std::string> answer_history) {
  const std::size_t n = answer_history.size();
  CacheSlotPlan plan;
  if (n < 2) return plan;
  const std::string& older = answer_history[n - 2];
  const std::string& newer = answer_history[n - 1];
  const std::size_t pair_index = n - 1;  // 1-based: pair k checks answers k, k+1
  if (pair_index % 2 == 1) {
    // Odd pair: the newer answer is a triplet's middle element; pinning it
    // into the fixed slot lets the following (even) pair reuse the prefix.
    plan.fixed_slot_answer = newer;
    plan.rotating_slot_answer = older;
    plan.reuse_prefix = false;
  } else {
    // Even pair: the fixed slot already holds this answer from the previous
    // check, so the rendered prompt shares its prefix with that check.
    plan.fixed_slot_answer = older;
    plan.rotating_slot_answer = newer;
    plan.reuse_prefix = true;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Verdict extraction

namespace {

// Strips one leading wordpiece space marker (Ġ or ▁, both two bytes in
// UTF-8) or ASCII whitespace, then lowercases ASCII.
std::string normalize_verdict_token(std::string_view token) {
  std::string_view v = token;
  while (!v.empty()) {
    if (v.size() >= 2 && ((static_cast<unsigned char>(v[0]) == 0xC4 &&
                           static_cast<unsigned char>(v[1]) == 0xA0) ||  // Ġ
                          (static_cast<unsigned char>(v[0]) == 0xE2 &&
                           v.size() >= 3 &&
                           static_cast<unsigned char>(v[1]) == 0x96 &&
                           static_cast<unsigned char>(v[2]) == 0x81))) {  // ▁
      v.remove_prefix(static_cast<unsigned char>(v[0]) == 0xC4 ? 2 : 3);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(v[0]))) {
      v.remove_prefix(1);
      continue;
    }
    break;
  }
  std::string out;
  out.reserve(v.size());
  for (char c : v) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

JudgeOutcome verdict_from_logprobs(VerdictKind kind, std::span<const TokenLogprob> top,
                                   std::chrono::microseconds latency) {
  double p_yes = 0.0;
  double p_no = 0.0;
  bool saw_any = false;
  for (const TokenLogprob& entry : top) {
    const std::string norm = normalize_verdict_token(entry.token);
    if (norm == "yes") {
      p_yes += std::exp(entry.logprob);
      saw_any = true;
    } else if (norm == "no") {
      p_no += std::exp(entry.logprob);
      saw_any = true;
    }
  }
  JudgeOutcome outcome;
  outcome.verdict = make_verdict(kind, p_yes, p_no, latency);
  outcome.token_missing = !saw_any;
  return outcome;
}

// ---------------------------------------------------------------------------
// Mock rules

namespace {

bool contains_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  if (haystack.size() < needle.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (std::tolower(static_cast<unsigned char>(haystack[i + j])) !=
          std::tolower(static_cast<unsigned char>(needle[j]))) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

std::string_view strip_wrappers(std::string_view word) {
  const std::string_view open = "([{\"'$";
  const std::string_view close = ")]}\"'$.,!?;:";
  while (!word.empty() && open.find(word.front()) != std::string_view::npos) {
    word.remove_prefix(1);
  }
  while (!word.empty() && close.find(word.back()) != std::string_view::npos) {
    word.remove_suffix(1);
  }
  return word;
}

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

// Accepts 12, -3, +4.50, .5, 14/3. Fractions require a nonzero denominator.
bool is_numeric_word(std::string_view s) {
  if (s.empty()) return false;
  if (s[0] == '+' || s[0] == '-') s.remove_prefix(1);
  if (s.empty()) return false;
  const std::size_t slash = s.find('/');
  if (slash != std::string_view::npos) {
    const std::string_view num = s.substr(0, slash);
    const std::string_view den = s.substr(slash + 1);
    return all_digits(num) && all_digits(den) && den.find_first_not_of('0') != std::string_view::npos;
  }
  const std::size_t dot = s.find('.');
  if (dot == std::string_view::npos) return all_digits(s);
  const std::string_view ip = s.substr(0, dot);
  const std::string_view fp = s.substr(dot + 1);
  if (ip.empty() && fp.empty()) return false;
  return (ip.empty() || all_digits(ip)) && (fp.empty() || all_digits(fp));
}

const std::map<std::string, int>& number_words() {
  static const std::map<std::string, int> words = {
      {"zero", 0},     {"one", 1},       {"two", 2},       {"three", 3},
      {"four", 4},     {"five", 5},      {"six", 6},       {"seven", 7},
      {"eight", 8},    {"nine", 9},      {"ten", 10},      {"eleven", 11},
      {"twelve", 12},  {"thirteen", 13}, {"fourteen", 14}, {"fifteen", 15},
      {"sixteen", 16}, {"seventeen", 17}, {"eighteen", 18}, {"nineteen", 19},
      {"twenty", 20},  {"thirty", 30},   {"forty", 40},    {"fifty", 50},
      {"sixty", 60},   {"seventy", 70},  {"eighty", 80},   {"ninety", 90},
  };
  return words;
}

std::optional<int> number_word_value(std::string_view word) {
  std::string lower;
  lower.reserve(word.size());
  for (char c : word) {
    lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  const auto& words = number_words();
  if (auto it = words.find(lower); it != words.end()) return it->second;
  // Composed tens-units form, e.g. twenty-one.
  const std::size_t dash = lower.find('-');
  if (dash == std::string::npos) return std::nullopt;
  const auto tens = words.find(lower.substr(0, dash));
  const auto units = words.find(lower.substr(dash + 1));
  if (tens == words.end() || units == words.end()) return std::nullopt;
  if (tens->second < 20 || tens->second % 10 != 0) return std::nullopt;
  if (units->second < 1 || units->second > 9) return std::nullopt;
  return tens->second + units->second;
}

bool is_option_letter(std::string_view s) {
  if (s.size() != 1) return false;
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return c >= 'A' && c <= 'E';
}

std::uint64_t parse_digits(std::string_view s) {
  std::uint64_t v = 0;
  for (char c : s) v = v * 10 + static_cast<std::uint64_t>(c - '0');
  return v;
}

// Canonical text for one numeric word: sign normalized, leading zeros
// dropped, fractions reduced, decimal trailing zeros trimmed.
std::string canonical_number(std::string_view s) {
  bool negative = false;
  if (s[0] == '+' || s[0] == '-') {
    negative = s[0] == '-';
    s.remove_prefix(1);
  }
  const std::size_t slash = s.find('/');
  if (slash != std::string_view::npos) {
    std::uint64_t num = parse_digits(s.substr(0, slash));
    std::uint64_t den = parse_digits(s.substr(slash + 1));
    const std::uint64_t g = std::gcd(num, den);
    if (g > 0) {
      num /= g;
      den /= g;
    }
    if (num == 0) return "0";
    std::string out = negative ? "-" : "";
    out += std::to_string(num);
    if (den != 1) out += "/" + std::to_string(den);
    return out;
  }
  const std::size_t dot = s.find('.');
  if (dot == std::string_view::npos) {
    std::string_view trimmed = s;
    while (trimmed.size() > 1 && trimmed.front() == '0') trimmed.remove_prefix(1);
    if (trimmed == "0") return "0";
    return (negative ? "-" : "") + std::string(trimmed);
  }
  std::string_view ip = s.substr(0, dot);
  std::string_view fp = s.substr(dot + 1);
  while (ip.size() > 1 && ip.front() == '0') ip.remove_prefix(1);
  while (!fp.empty() && fp.back() == '0') fp.remove_suffix(1);
  std::string out = ip.empty() ? "0" : std::string(ip);
  if (!fp.empty()) out += "." + std::string(fp);
  if (out == "0") return "0";
  return (negative ? "-" : "") + out;
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

// Canonical value for one stripped word, or nullopt if it is not an answer
// candidate.
std::optional<std::string> canonical_candidate(std::string_view word) {
  if (word.empty()) return std::nullopt;
  if (is_numeric_word(word)) return canonical_number(word);
  if (auto value = number_word_value(word)) return std::to_string(*value);
  if (is_option_letter(word)) {
    return std::string(
        1, static_cast<char>(std::toupper(static_cast<unsigned char>(word[0]))));
  }
  return std::nullopt;
}

// Body of the last \boxed{...} with balanced braces, or nullopt.
std::optional<std::string> last_boxed_body(std::string_view content) {
  const std::string_view kBoxed = "\\boxed{";
  const std::size_t pos = content.rfind(kBoxed);
  if (pos == std::string_view::npos) return std::nullopt;
  std::size_t i = pos + kBoxed.size();
  int depth = 1;
  std::string body;
  while (i < content.size()) {
    const char c = content[i];
    if (c == '{') {
      ++depth;
    } else if (c == '}') {
      --depth;
      if (depth == 0) return body;
    }
    body += c;
    ++i;
  }
  return std::nullopt;  // unbalanced; treat as absent
}

// \frac{a}{b} -> "a/b" when both bodies are plain digit runs.
std::optional<std::string> frac_to_slash(std::string_view s) {
  const std::string_view kFrac = "\\frac{";
  if (s.substr(0, kFrac.size()) != kFrac) return std::nullopt;
  const std::size_t close1 = s.find('}', kFrac.size());
  if (close1 == std::string_view::npos) return std::nullopt;
  if (close1 + 1 >= s.size() || s[close1 + 1] != '{') return std::nullopt;
  const std::size_t close2 = s.find('}', close1 + 2);
  if (close2 == std::string_view::npos || close2 + 1 != s.size()) return std::nullopt;
  const std::string_view a = s.substr(kFrac.size(), close1 - kFrac.size());
  const std::string_view b = s.substr(close1 + 2, close2 - close1 - 2);
  if (!all_digits(a) || !all_digits(b)) return std::nullopt;
  return std::string(a) + "/" + std::string(b);
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return std::string(s);
}

// Whitespace stripped, math-delimiter markup dropped, ASCII lowercased.
std::string loose_form(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == '$') continue;
    if (c == '\\' && i + 1 < text.size() &&
        (text[i + 1] == '(' || text[i + 1] == ')' || text[i + 1] == '[' ||
         text[i + 1] == ']')) {
      ++i;
      continue;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

bool mock_existence(std::string_view content) {
  if (contains_ci(content, "answer is")) return true;
  if (content.find("= ") != std::string_view::npos) return true;
  if (content.find("\\boxed{") != std::string_view::npos) return true;
  const std::vector<std::string_view> words = split_words(content);
  if (words.empty()) return false;
  return canonical_candidate(strip_wrappers(words.back())).has_value();
}

std::string extract_candidate_answer(std::string_view content) {
  if (auto boxed = last_boxed_body(content)) {
    const std::string body = trim(*boxed);
    if (auto frac = frac_to_slash(body)) return canonical_number(*frac);
    if (auto canon = canonical_candidate(strip_wrappers(body))) return *canon;
    return loose_form(body);
  }
  std::string last;
  for (std::string_view word : split_words(content)) {
    if (auto canon = canonical_candidate(strip_wrappers(word))) last = *canon;
  }
  return last;
}

bool mock_equivalent(std::string_view answer_1, std::string_view answer_2) {
  const std::string a = extract_candidate_answer(answer_1);
  const std::string b = extract_candidate_answer(answer_2);
  if (!a.empty() && !b.empty()) return a == b;
  return loose_form(answer_1) == loose_form(answer_2);
}

VerifierVerdict mock_judge(VerdictKind kind, std::string_view question,
                           std::string_view content_a, std::string_view content_b) {
  (void)question;  // the rules are question-independent by design
  bool yes = false;
  if (kind == VerdictKind::kExistence) {
    yes = mock_existence(content_a);
  } else {
    yes = mock_equivalent(content_a, content_b);
  }
  return make_verdict(kind, yes ? 1.0 : 0.0, yes ? 0.0 : 1.0,
                      std::chrono::microseconds{0});
}

JudgeOutcome RuleMockEngine::judge(const CheckRequest& request) {
  JudgeOutcome outcome;
  outcome.verdict =
      mock_judge(request.kind, request.question, request.content_a, request.content_b);
  return outcome;
}

}  // namespace trimctl::verifier
