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

#include <random>
#include <string>
#include <variant>

#include "doctest.h"

namespace {

using namespace trimctl::protocol;

const ProtocolError* as_error(const std::variant<EngineMessage, ProtocolError>& r) {
  return std::get_if<ProtocolError>(&r);
}

const EngineMessage* as_message(const std::variant<EngineMessage, ProtocolError>& r) {
  return std::get_if<EngineMessage>(&r);
}

bool error_with(const std::string& line, ErrorCode code, const std::string& needle) {
  auto result = decode_message(line);
  const auto* err = as_error(result);
  if (err == nullptr) return false;
  if (err->code != code) return false;
  return err->detail.find(needle) != std::string::npos;
}

std::string reencode(const std::string& line) {
  auto result = decode_message(line);
  const auto* msg = as_message(result);
  REQUIRE(msg != nullptr);
  return encode_message(*msg);
}

}  // namespace

TEST_CASE("canonical lines survive decode/encode byte for byte") {
  const std::string reg = R"({"type":"register","seq":"s1","question":"What is 2+2?"})";
  CHECK(reencode(reg) == reg);

  const std::string reg_ov =
      R"({"type":"register","seq":"s1","question":"q","overrides":{"token_budget":"4000"}})";
  CHECK(reencode(reg_ov) == reg_ov);

  const std::string upd =
      R"({"type":"update","seq":"s1","step":50,"token_ids":[1,2,3],"text":"So x = 2.\n"})";
  CHECK(reencode(upd) == upd);

  const std::string upd_markers =
      R"({"type":"update","seq":"s1","step":51,"token_ids":[],"markers":["think_end","eos"]})";
  CHECK(reencode(upd_markers) == upd_markers);

  const std::string close = R"({"type":"close","seq":"s1"})";
  CHECK(reencode(close) == close);
}

TEST_CASE("decoded fields land in the right places") {
  auto result = decode_message(
      R"({"type":"update","seq":"abc","step":150,"token_ids":[-5,2147483647],"text":"t"})");
  const auto* msg = as_message(result);
  REQUIRE(msg != nullptr);
  const auto* upd = std::get_if<UpdateMessage>(msg);
  REQUIRE(upd != nullptr);
  CHECK(upd->seq == "abc");
  CHECK(upd->step == 150);
  REQUIRE(upd->token_ids.size() == 2);
  CHECK(upd->token_ids[0] == -5);
  CHECK(upd->token_ids[1] == 2147483647);
  REQUIRE(upd->text.has_value());
  CHECK(*upd->text == "t");
  CHECK_FALSE(upd->markers.any());
}

TEST_CASE("integer sequence ids canonicalize to strings") {
  auto result = decode_message(R"({"type":"close","seq":42})");
  const auto* msg = as_message(result);
  REQUIRE(msg != nullptr);
  const auto* close = std::get_if<CloseMessage>(msg);
  REQUIRE(close != nullptr);
  CHECK(close->seq == "42");
}

TEST_CASE("register overrides accept scalars and stringify them") {
  auto result = decode_message(
      R"({"type":"register","seq":"a","question":"q",)"
      R"("overrides":{"token_budget":1000,"enable_overthink":true,"eos_marker":"X"}})");
  const auto* msg = as_message(result);
  REQUIRE(msg != nullptr);
  const auto* reg = std::get_if<RegisterMessage>(msg);
  REQUIRE(reg != nullptr);
  CHECK(reg->overrides.at("token_budget") == "1000");
  CHECK(reg->overrides.at("enable_overthink") == "true");
  CHECK(reg->overrides.at("eos_marker") == "X");

  CHECK(error_with(
      R"({"type":"register","seq":"a","question":"q","overrides":{"k":[1]}})",
      ErrorCode::kSchemaError, "overrides.k"));
}

TEST_CASE("unknown fields are ignored, unknown values are not") {
  CHECK(as_message(decode_message(
            R"({"type":"close","seq":"a","extra":{"x":1},"later":null})")) != nullptr);

  CHECK(error_with(R"({"type":"warmup","seq":"a"})", ErrorCode::kSchemaError,
                   "unknown message type"));
  CHECK(error_with(
      R"({"type":"update","seq":"a","step":1,"token_ids":[],"markers":["boom"]})",
      ErrorCode::kSchemaError, "markers[0]"));
}

TEST_CASE("frame and schema errors are distinguished and name fields") {
  CHECK(error_with("{garbage", ErrorCode::kFrameError, "not valid JSON"));
  CHECK(error_with("[1,2,3]", ErrorCode::kFrameError, "not a JSON object"));
  CHECK(error_with("{}", ErrorCode::kSchemaError, "type"));
  CHECK(error_with(R"({"type":12})", ErrorCode::kSchemaError, "type"));
  CHECK(error_with(R"({"type":"register","question":"q"})", ErrorCode::kSchemaError,
                   "seq"));
  CHECK(error_with(R"({"type":"register","seq":"a"})", ErrorCode::kSchemaError,
                   "question"));
  CHECK(error_with(R"({"type":"update","seq":"a","token_ids":[]})",
                   ErrorCode::kSchemaError, "step"));
  CHECK(error_with(R"({"type":"update","seq":"a","step":-1,"token_ids":[]})",
                   ErrorCode::kSchemaError, "step"));
  CHECK(error_with(R"({"type":"update","seq":"a","step":1})", ErrorCode::kSchemaError,
                   "token_ids"));
  CHECK(error_with(R"({"type":"update","seq":"a","step":1,"token_ids":[1,"x"]})",
                   ErrorCode::kSchemaError, "token_ids[1]"));
  CHECK(error_with(R"({"type":"update","seq":"a","step":1,"token_ids":[1,4294967296]})",
                   ErrorCode::kSchemaError, "token_ids[1]"));
  CHECK(error_with(R"({"type":"update","seq":"a","step":1,"token_ids":[],"text":7})",
                   ErrorCode::kSchemaError, "text"));
  CHECK(error_with(R"({"type":"close","seq":{}})", ErrorCode::kSchemaError, "seq"));
}

TEST_CASE("response encodings are fixed strings") {
  trimctl::controller::CompressionAction action;
  action.kind = trimctl::controller::ActionKind::kOverthink;
  action.force_text = "WRAP UP";
  action.then_mode = trimctl::controller::ThenMode::kContinueGeneration;
  FlagMessage flag{"s7", action, 150};
  CHECK(encode_flag(flag) ==
        R"({"type":"flag","seq":"s7","kind":"overthink","force_text":"WRAP UP",)"
        R"("then_mode":"continue_generation","step":150})");

  action.kind = trimctl::controller::ActionKind::kRepetition;
  action.force_text = "<eos>";
  action.then_mode = trimctl::controller::ThenMode::kEmitEos;
  FlagMessage eos_flag{"s7", action, 9};
  CHECK(encode_flag(eos_flag) ==
        R"({"type":"flag","seq":"s7","kind":"repetition","force_text":"<eos>",)"
        R"("then_mode":"emit_eos","step":9})");

  CHECK(encode_ack() == R"({"type":"ack"})");
  CHECK(encode_error({ErrorCode::kUnknownSequence, "seq \"x\" is not registered"}) ==
        R"({"type":"error","code":"UNKNOWN_SEQUENCE","detail":"seq \"x\" is not registered"})");
}

TEST_CASE("error code names are stable") {
  CHECK(std::string(error_code_name(ErrorCode::kFrameError)) == "FRAME_ERROR");
  CHECK(std::string(error_code_name(ErrorCode::kSchemaError)) == "SCHEMA_ERROR");
  CHECK(std::string(error_code_name(ErrorCode::kUnknownSequence)) == "UNKNOWN_SEQUENCE");
  CHECK(std::string(error_code_name(ErrorCode::kDuplicateId)) == "DUPLICATE_ID");
  CHECK(std::string(error_code_name(ErrorCode::kInternal)) == "INTERNAL");
}

TEST_CASE("random messages round-trip through their encoding") {
  std::mt19937 rng(20260825);
  auto random_text = [&](std::size_t max_len) {
    static const char* kPieces[] = {"a", "Z", "7", " ", "\"", "\\", "\n", "\t",
                                    "{", "}", "[", "]", ":", ",", "\xc3\xa9"};
    std::string s;
    std::size_t n = rng() % max_len;
    for (std::size_t i = 0; i < n; ++i) s += kPieces[rng() % 15];
    return s;
  };

  for (int i = 0; i < 2000; ++i) {
    EngineMessage msg;
    switch (rng() % 3) {
      case 0: {
        RegisterMessage reg;
        reg.seq = "s" + std::to_string(rng() % 1000);
        reg.question = random_text(30);
        if (rng() % 2) reg.overrides["token_budget"] = std::to_string(rng() % 100000);
        if (rng() % 4 == 0) reg.overrides["eos_marker"] = random_text(6);
        msg = reg;
        break;
      }
      case 1: {
        UpdateMessage upd;
        upd.seq = std::to_string(rng() % 1000);
        upd.step = rng();
        std::size_t n = rng() % 8;
        for (std::size_t t = 0; t < n; ++t) {
          upd.token_ids.push_back(static_cast<std::int32_t>(rng()));
        }
        if (rng() % 2) upd.text = random_text(40);
        upd.markers.think_end = rng() % 8 == 0;
        upd.markers.eos = rng() % 8 == 0;
        msg = upd;
        break;
      }
      default: {
        CloseMessage close;
        close.seq = "c" + std::to_string(rng() % 1000);
        msg = close;
        break;
      }
    }
    const std::string line = encode_message(msg);
    auto decoded = decode_message(line);
    const auto* back = as_message(decoded);
    REQUIRE(back != nullptr);
    CHECK(encode_message(*back) == line);
  }
}

TEST_CASE("fuzzed frames never throw and always classify") {
  std::mt19937 rng(444);
  const std::string canon =
      R"({"type":"update","seq":"s1","step":50,"token_ids":[1,2,3],"text":"abc"})";
  for (int i = 0; i < 10000; ++i) {
    std::string line;
    if (i % 3 == 0) {
      std::size_t n = rng() % 64;
      for (std::size_t c = 0; c < n; ++c) {
        line += static_cast<char>(rng() % 256);
      }
    } else {
      line = canon;
      std::size_t edits = 1 + rng() % 4;
      for (std::size_t e = 0; e < edits && !line.empty(); ++e) {
        std::size_t at = rng() % line.size();
        switch (rng() % 3) {
          case 0:
            line.erase(at, 1);
            break;
          case 1:
            line.insert(at, 1, static_cast<char>(' ' + rng() % 95));
            break;
          default:
            line[at] = static_cast<char>(' ' + rng() % 95);
            break;
        }
      }
    }
    auto result = decode_message(line);
    if (const auto* msg = as_message(result)) {
      // Whatever decoded must re-encode canonically and decode again equal.
      const std::string canonical = encode_message(*msg);
      auto second = decode_message(canonical);
      const auto* again = as_message(second);
      REQUIRE(again != nullptr);
      CHECK(encode_message(*again) == canonical);
    } else {
      const auto* err = as_error(result);
      REQUIRE(err != nullptr);
      CHECK_FALSE(err->detail.empty());
    }
  }
}
