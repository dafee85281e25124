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

#include "trimctl/protocol.hpp"

#include <limits>

#include "json.hpp"

namespace trimctl::protocol {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kThinkEndMarkerName = "think_end";
constexpr const char* kEosMarkerName = "eos";

ProtocolError schema_error(std::string detail) {
  return ProtocolError{ErrorCode::kSchemaError, std::move(detail)};
}

// seq ids may arrive as JSON strings or integers; both canonicalize to the
// string form.
std::optional<std::string> read_seq(const json& obj, ProtocolError& error) {
  const auto it = obj.find("seq");
  if (it == obj.end()) {
    error = schema_error("seq: required field missing");
    return std::nullopt;
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  error = schema_error("seq: expected string or integer");
  return std::nullopt;
}

std::variant<EngineMessage, ProtocolError> decode_register(const json& obj) {
  ProtocolError error;
  RegisterMessage msg;
  if (auto seq = read_seq(obj, error)) {
    msg.seq = *seq;
  } else {
    return error;
  }
  const auto q = obj.find("question");
  if (q == obj.end()) return schema_error("question: required field missing");
  if (!q->is_string()) return schema_error("question: expected string");
  msg.question = q->get<std::string>();
  if (const auto ov = obj.find("overrides"); ov != obj.end()) {
    if (!ov->is_object()) return schema_error("overrides: expected object");
    for (auto it = ov->begin(); it != ov->end(); ++it) {
      std::string value;
      if (it.value().is_string()) {
        value = it.value().get<std::string>();
      } else if (it.value().is_number() || it.value().is_boolean()) {
        value = it.value().dump();
      } else {
        return schema_error("overrides." + it.key() + ": expected scalar");
      }
      msg.overrides[it.key()] = value;
    }
  }
  return EngineMessage{std::move(msg)};
}

std::variant<EngineMessage, ProtocolError> decode_update(const json& obj) {
  ProtocolError error;
  UpdateMessage msg;
  if (auto seq = read_seq(obj, error)) {
    msg.seq = *seq;
  } else {
    return error;
  }
  const auto step = obj.find("step");
  if (step == obj.end()) return schema_error("step: required field missing");
  if (!step->is_number_unsigned() && !step->is_number_integer()) {
    return schema_error("step: expected non-negative integer");
  }
  if (step->is_number_integer() && step->get<std::int64_t>() < 0) {
    return schema_error("step: expected non-negative integer");
  }
  msg.step = step->get<std::uint64_t>();

  const auto ids = obj.find("token_ids");
  if (ids == obj.end()) return schema_error("token_ids: required field missing");
  if (!ids->is_array()) return schema_error("token_ids: expected array");
  msg.token_ids.reserve(ids->size());
  for (std::size_t i = 0; i < ids->size(); ++i) {
    const json& e = (*ids)[i];
    if (!e.is_number_integer()) {
      return schema_error("token_ids[" + std::to_string(i) + "]: expected integer");
    }
    const std::int64_t v = e.get<std::int64_t>();
    if (v < std::numeric_limits<std::int32_t>::min() ||
        v > std::numeric_limits<std::int32_t>::max()) {
      return schema_error("token_ids[" + std::to_string(i) + "]: out of 32-bit range");
    }
    msg.token_ids.push_back(static_cast<std::int32_t>(v));
  }

  if (const auto text = obj.find("text"); text != obj.end()) {
    if (!text->is_string()) return schema_error("text: expected string");
    msg.text = text->get<std::string>();
  }

  if (const auto markers = obj.find("markers"); markers != obj.end()) {
    if (!markers->is_array()) return schema_error("markers: expected array");
    for (std::size_t i = 0; i < markers->size(); ++i) {
      const json& e = (*markers)[i];
      if (!e.is_string()) {
        return schema_error("markers[" + std::to_string(i) + "]: expected string");
      }
      const std::string name = e.get<std::string>();
      if (name == kThinkEndMarkerName) {
        msg.markers.think_end = true;
      } else if (name == kEosMarkerName) {
        msg.markers.eos = true;
      } else {
        return schema_error("markers[" + std::to_string(i) + "]: unknown marker \"" +
                            name + "\"");
      }
    }
  }
  return EngineMessage{std::move(msg)};
}

std::variant<EngineMessage, ProtocolError> decode_close(const json& obj) {
  ProtocolError error;
  CloseMessage msg;
  if (auto seq = read_seq(obj, error)) {
    msg.seq = *seq;
  } else {
    return error;
  }
  return EngineMessage{std::move(msg)};
}

const char* then_mode_name(controller::ThenMode mode) {
  return mode == controller::ThenMode::kEmitEos ? "emit_eos" : "continue_generation";
}

}  // namespace

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFrameError:
      return "FRAME_ERROR";
    case ErrorCode::kSchemaError:
      return "SCHEMA_ERROR";
    case ErrorCode::kUnknownSequence:
      return "UNKNOWN_SEQUENCE";
    case ErrorCode::kDuplicateId:
      return "DUPLICATE_ID";
    case ErrorCode::kInternal:
      return "INTERNAL";
  }
  return "UNKNOWN";
}

std::variant<EngineMessage, ProtocolError> decode_message(std::string_view line) {
  const json obj = json::parse(line, nullptr, false);
  if (obj.is_discarded()) {
    return ProtocolError{ErrorCode::kFrameError, "frame is not valid JSON"};
  }
  if (!obj.is_object()) {
    return ProtocolError{ErrorCode::kFrameError, "frame is not a JSON object"};
  }
  const auto type = obj.find("type");
  if (type == obj.end()) return schema_error("type: required field missing");
  if (!type->is_string()) return schema_error("type: expected string");
  const std::string t = type->get<std::string>();
  if (t == "register") return decode_register(obj);
  if (t == "update") return decode_update(obj);
  if (t == "close") return decode_close(obj);
  return schema_error("type: unknown message type \"" + t + "\"");
}

std::string encode_message(const EngineMessage& message) {
  ordered_json out;
  if (const auto* reg = std::get_if<RegisterMessage>(&message)) {
    out["type"] = "register";
    out["seq"] = reg->seq;
    out["question"] = reg->question;
    if (!reg->overrides.empty()) {
      ordered_json ov = ordered_json::object();
      for (const auto& [k, v] : reg->overrides) ov[k] = v;
      out["overrides"] = std::move(ov);
    }
  } else if (const auto* upd = std::get_if<UpdateMessage>(&message)) {
    out["type"] = "update";
    out["seq"] = upd->seq;
    out["step"] = upd->step;
    out["token_ids"] = upd->token_ids;
    if (upd->text.has_value()) out["text"] = *upd->text;
    if (upd->markers.any()) {
      ordered_json markers = ordered_json::array();
      if (upd->markers.think_end) markers.push_back(kThinkEndMarkerName);
      if (upd->markers.eos) markers.push_back(kEosMarkerName);
      out["markers"] = std::move(markers);
    }
  } else if (const auto* close = std::get_if<CloseMessage>(&message)) {
    out["type"] = "close";
    out["seq"] = close->seq;
  }
  return out.dump();
}

std::string encode_flag(const FlagMessage& flag) {
  ordered_json out;
  out["type"] = "flag";
  out["seq"] = flag.seq;
  out["kind"] = controller::action_kind_name(flag.action.kind);
  out["force_text"] = flag.action.force_text;
  out["then_mode"] = then_mode_name(flag.action.then_mode);
  out["step"] = flag.step;
  return out.dump();
}

std::string encode_ack() { return R"({"type":"ack"})"; }

std::string encode_error(const ProtocolError& error) {
  ordered_json out;
  out["type"] = "error";
  out["code"] = error_code_name(error.code);
  out["detail"] = error.detail;
  return out.dump();
}

}  // namespace trimctl::protocol
