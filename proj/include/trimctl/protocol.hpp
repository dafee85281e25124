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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "trimctl/controller.hpp"
#include "trimctl/segmenter.hpp"

namespace trimctl::protocol {

// Engine-to-sidecar frames (one JSON object per line; see docs/protocol.md).

struct RegisterMessage {
  std::string seq;
  std::string question;
  // Optional per-sequence compression overrides, same keys as the
  // compression.* config section minus the "compression." prefix.
  std::map<std::string, std::string> overrides;
};

struct UpdateMessage {
  std::string seq;
  std::uint64_t step = 0;
  std::vector<std::int32_t> token_ids;
  std::optional<std::string> text;
  // Markers the engine already knows about (it sees special tokens as ids);
  // the sidecar also scans text for marker strings itself.
  segmenter::MarkerSet markers;
};

struct CloseMessage {
  std::string seq;
};

using EngineMessage = std::variant<RegisterMessage, UpdateMessage, CloseMessage>;

enum class ErrorCode {
  kFrameError,       // not a JSON object line
  kSchemaError,      // JSON fine, contents not
  kUnknownSequence,  // seq not registered
  kDuplicateId,      // register for a live seq
  kInternal,         // sidecar bug; sequence continues unflagged
};

const char* error_code_name(ErrorCode code);

struct ProtocolError {
  ErrorCode code = ErrorCode::kFrameError;
  std::string detail;  // includes the offending field path when known
};

// Sidecar-to-engine flag frame.
struct FlagMessage {
  std::string seq;
  controller::CompressionAction action;
  std::uint64_t step = 0;  // engine step the flag was issued at
};

// Parses one frame. Unknown fields are ignored; wrong types and missing
// required fields produce kSchemaError with the field path; non-JSON input
// produces kFrameError.
std::variant<EngineMessage, ProtocolError> decode_message(std::string_view line);

// Canonical encodings (fixed field order, no added whitespace, no trailing
// newline). decode(encode(m)) == m and encode(decode(line)) == line for
// canonical lines.
std::string encode_message(const EngineMessage& message);
std::string encode_flag(const FlagMessage& flag);
std::string encode_ack();
std::string encode_error(const ProtocolError& error);

}  // namespace trimctl::protocol
