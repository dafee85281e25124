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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trimctl::segmenter {

// Approximate token interval [begin, end) attributed to a thought. Token
// attribution is prorated from char counts when a separator lands inside an
// update, so spans are estimates; char-level fields are exact.
struct TokenSpan {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

// One completed reasoning step. `text` is the exact bytes between
// separators; `terminator` is the separator consumed after it ("" for the
// final flush), so concatenating text + terminator over all thoughts
// reconstructs the stream byte for byte.
struct SubThought {
  std::size_t index = 0;
  std::string text;
  TokenSpan token_span;
  bool too_short = false;
  std::string terminator;
};

// Trailing-sentence slice of a thought, the unit sent for verification.
struct ThoughtAnswer {
  std::size_t thought_index = 0;
  std::string text;
};

// Incremental split state for one sequence's think-phase stream. Fields are
// maintained by ingest/close_stream; treat them as read-only elsewhere.
struct StreamCursor {
  StreamCursor(std::string sequence_id, std::vector<std::string> reflection_tokens,
               std::size_t min_thought_chars);

  std::string sequence_id;
  std::vector<std::string> reflection_tokens;
  std::size_t min_thought_chars = 0;

  std::string buffered;          // text not yet emitted as a thought
  std::uint64_t total_chars = 0;  // chars ingested, including separators
  std::uint64_t total_tokens = 0;
  std::uint64_t emitted_chars = 0;  // chars emitted as thoughts + separators
  std::size_t completed_thoughts = 0;  // separators consumed so far
  std::uint64_t next_span_begin = 0;
  bool open = true;

  std::size_t max_separator_len = 0;  // cached for the re-scan window
};

// Appends streamed text, splitting off every thought completed by a
// reflection-token separator. Splitting is chunking-invariant: any partition
// of the same stream yields byte-identical thoughts. A separator spanning a
// chunk boundary is recognized once its remainder arrives.
std::vector<SubThought> ingest(StreamCursor& cursor, std::string_view delta_text,
                               std::uint64_t delta_token_count);

// Ends the stream, flushing buffered text as a final thought with an empty
// terminator. Returns nullopt when nothing is buffered or already closed.
// completed_thoughts stays at the separator count; the flush does not add.
std::optional<SubThought> close_stream(StreamCursor& cursor);

// Splits on runs of sentence terminators (. ! ? \n); each terminator run
// stays attached to its sentence, so concatenating the parts reproduces the
// input exactly. Empty input yields an empty list.
std::vector<std::string> split_sentences(std::string_view text);

// Last `max_sentences` sentences of the thought, concatenated in order.
// Thoughts flagged too_short carry no answer.
std::optional<ThoughtAnswer> extract_answer(const SubThought& thought,
                                            std::size_t max_sentences);

struct MarkerSet {
  bool think_end = false;
  bool eos = false;

  bool any() const { return think_end || eos; }
};

// Literal substring scan of one update's text for phase markers. Stateless;
// markers split across updates are the engine's to report explicitly.
MarkerSet detect_markers(std::string_view delta_text, std::string_view think_end_marker,
                         std::string_view eos_marker);

}  // namespace trimctl::segmenter
