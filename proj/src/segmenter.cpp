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

#include "trimctl/segmenter.hpp"

#include <algorithm>
#include <cmath>

namespace trimctl::segmenter {

namespace {

// Leftmost match wins; on a tie the longest separator wins, so a separator
// that extends another (e.g. "\n\nLet me verify this" vs a shorter prefix
// form) is never split early.
struct Match {
  std::size_t pos = std::string::npos;
  std::size_t len = 0;
  std::size_t which = 0;
};

std::optional<Match> find_separator(const std::string& haystack, std::size_t from,
                                    const std::vector<std::string>& separators) {
  Match best;
  for (std::size_t i = 0; i < separators.size(); ++i) {
    const std::string& sep = separators[i];
    const std::size_t pos = haystack.find(sep, from);
    if (pos == std::string::npos) continue;
    if (pos < best.pos || (pos == best.pos && sep.size() > best.len)) {
      best = {pos, sep.size(), i};
    }
  }
  if (best.pos == std::string::npos) return std::nullopt;
  return best;
}

// Tokens attributed to the stream's first `chars` chars, prorated and
// clamped monotone. Exact when separators land on update boundaries.
std::uint64_t prorated_tokens(const StreamCursor& cursor, std::uint64_t chars) {
  if (cursor.total_chars == 0) return 0;
  const double share = static_cast<double>(chars) / static_cast<double>(cursor.total_chars);
  const double est = share * static_cast<double>(cursor.total_tokens);
  return std::min<std::uint64_t>(cursor.total_tokens,
                                 static_cast<std::uint64_t>(std::llround(est)));
}

SubThought make_thought(StreamCursor& cursor, std::string text, std::string terminator) {
  SubThought t;
  t.index = cursor.completed_thoughts;
  t.too_short = text.size() < cursor.min_thought_chars;
  t.text = std::move(text);
  t.terminator = std::move(terminator);
  cursor.emitted_chars += t.text.size() + t.terminator.size();
  const std::uint64_t end = std::max(cursor.next_span_begin,
                                     prorated_tokens(cursor, cursor.emitted_chars));
  t.token_span = {cursor.next_span_begin, end};
  cursor.next_span_begin = end;
  return t;
}

}  // namespace

StreamCursor::StreamCursor(std::string sequence_id_arg,
                           std::vector<std::string> reflection_tokens_arg,
                           std::size_t min_thought_chars_arg)
    : sequence_id(std::move(sequence_id_arg)),
      reflection_tokens(std::move(reflection_tokens_arg)),
      min_thought_chars(min_thought_chars_arg) {
  for (const std::string& sep : reflection_tokens) {
    max_separator_len = std::max(max_separator_len, sep.size());
  }
}

std::vector<SubThought> ingest(StreamCursor& cursor, std::string_view delta_text,
                               std::uint64_t delta_token_count) {
  std::vector<SubThought> out;
  if (!cursor.open) return out;

  // A separator crossing the chunk boundary can start at most len-1 chars
  // before the old end; anything earlier was ruled out by previous scans.
  const std::size_t old_size = cursor.buffered.size();
  std::size_t from =
      old_size > cursor.max_separator_len - 1 ? old_size - (cursor.max_separator_len - 1) : 0;
  if (cursor.max_separator_len == 0) from = old_size;

  cursor.buffered.append(delta_text);
  cursor.total_chars += delta_text.size();
  cursor.total_tokens += delta_token_count;

  while (true) {
    const auto match = find_separator(cursor.buffered, from, cursor.reflection_tokens);
    if (!match) break;
    std::string text = cursor.buffered.substr(0, match->pos);
    std::string terminator = cursor.buffered.substr(match->pos, match->len);
    cursor.buffered.erase(0, match->pos + match->len);
    out.push_back(make_thought(cursor, std::move(text), std::move(terminator)));
    cursor.completed_thoughts += 1;
    from = 0;
  }
  return out;
}

std::optional<SubThought> close_stream(StreamCursor& cursor) {
  if (!cursor.open) return std::nullopt;
  cursor.open = false;
  if (cursor.buffered.empty()) return std::nullopt;
  std::string text;
  text.swap(cursor.buffered);
  return make_thought(cursor, std::move(text), "");
}

std::vector<std::string> split_sentences(std::string_view text) {
  const auto is_terminator = [](char c) {
    return c == '.' || c == '!' || c == '?' || c == '\n';
  };
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_terminator(text[i])) {
      while (i + 1 < text.size() && is_terminator(text[i + 1])) ++i;
      out.emplace_back(text.substr(start, i + 1 - start));
      start = i + 1;
    }
    ++i;
  }
  if (start < text.size()) out.emplace_back(text.substr(start));
  return out;
}

std::optional<ThoughtAnswer> extract_answer(const SubThought& thought,
                                            std::size_t max_sentences) {
  if (thought.too_short || max_sentences == 0) return std::nullopt;
  const std::vector<std::string> sentences = split_sentences(thought.text);
  if (sentences.empty()) return std::nullopt;
  const std::size_t keep = std::min(max_sentences, sentences.size());
  ThoughtAnswer answer;
  answer.thought_index = thought.index;
  for (std::size_t i = sentences.size() - keep; i < sentences.size(); ++i) {
    answer.text += sentences[i];
  }
  return answer;
}

MarkerSet detect_markers(std::string_view delta_text, std::string_view think_end_marker,
                         std::string_view eos_marker) {
  MarkerSet m;
  m.think_end = !think_end_marker.empty() &&
                delta_text.find(think_end_marker) != std::string_view::npos;
  m.eos = !eos_marker.empty() && delta_text.find(eos_marker) != std::string_view::npos;
  return m;
}

}  // namespace trimctl::segmenter
