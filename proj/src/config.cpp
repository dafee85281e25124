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

#include "trimctl/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

namespace trimctl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw ConfigError(path + ": " + why);
}

void expect_keys(const json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail(path + "." + it.key(), "unknown key");
  }
}

template <typename T>
void read_field(const json& obj, const std::string& path, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    fail(path + "." + key, "wrong type");
  }
}

void read_compression(const json& obj, const std::string& path, CompressionConfig& c) {
  expect_keys(obj, path,
              {"agreement_threshold", "update_interval_steps", "answer_sentences",
               "budget_pct_threshold", "round_threshold", "token_budget",
               "min_thought_chars", "reflection_tokens", "think_end_marker",
               "eos_marker", "gentle_prompt", "forceful_prompt", "enable_overthink",
               "enable_underthink", "enable_repetition", "repetition"});
  read_field(obj, path, "agreement_threshold", c.agreement_threshold);
  read_field(obj, path, "update_interval_steps", c.update_interval_steps);
  read_field(obj, path, "answer_sentences", c.answer_sentences);
  read_field(obj, path, "budget_pct_threshold", c.budget_pct_threshold);
  read_field(obj, path, "round_threshold", c.round_threshold);
  read_field(obj, path, "token_budget", c.token_budget);
  read_field(obj, path, "min_thought_chars", c.min_thought_chars);
  read_field(obj, path, "reflection_tokens", c.reflection_tokens);
  read_field(obj, path, "think_end_marker", c.think_end_marker);
  read_field(obj, path, "eos_marker", c.eos_marker);
  read_field(obj, path, "gentle_prompt", c.gentle_prompt);
  read_field(obj, path, "forceful_prompt", c.forceful_prompt);
  read_field(obj, path, "enable_overthink", c.enable_overthink);
  read_field(obj, path, "enable_underthink", c.enable_underthink);
  read_field(obj, path, "enable_repetition", c.enable_repetition);
  if (auto it = obj.find("repetition"); it != obj.end()) {
    const std::string rp = path + ".repetition";
    if (!it->is_object()) fail(rp, "expected object");
    expect_keys(*it, rp, {"period_min", "period_max", "min_repeats", "min_span", "window"});
    read_field(*it, rp, "period_min", c.repetition.period_min);
    read_field(*it, rp, "period_max", c.repetition.period_max);
    read_field(*it, rp, "min_repeats", c.repetition.min_repeats);
    read_field(*it, rp, "min_span", c.repetition.min_span);
    read_field(*it, rp, "window", c.repetition.window);
  }
}

void read_verifier(const json& obj, const std::string& path, VerifierConfig& v) {
  expect_keys(obj, path,
              {"mode", "url", "model", "timeout_ms", "top_logprobs", "max_inflight",
               "use_shots"});
  if (auto it = obj.find("mode"); it != obj.end()) {
    if (!it->is_string()) fail(path + ".mode", "expected string");
    const std::string m = it->get<std::string>();
    if (m == "mock") {
      v.mode = VerifierMode::kMock;
    } else if (m == "http") {
      v.mode = VerifierMode::kHttp;
    } else {
      fail(path + ".mode", "expected \"mock\" or \"http\", got \"" + m + "\"");
    }
  }
  read_field(obj, path, "url", v.url);
  read_field(obj, path, "model", v.model);
  if (auto it = obj.find("timeout_ms"); it != obj.end()) {
    std::int64_t ms = 0;
    try {
      ms = it->get<std::int64_t>();
    } catch (const json::exception&) {
      fail(path + ".timeout_ms", "wrong type");
    }
    v.timeout = std::chrono::milliseconds(ms);
  }
  read_field(obj, path, "top_logprobs", v.top_logprobs);
  read_field(obj, path, "max_inflight", v.max_inflight);
  read_field(obj, path, "use_shots", v.use_shots);
}

void read_service(const json& obj, const std::string& path, ServiceConfig& s) {
  expect_keys(obj, path, {"bind", "vocab_path"});
  read_field(obj, path, "bind", s.bind);
  read_field(obj, path, "vocab_path", s.vocab_path);
}

void read_sim(const json& obj, const std::string& path, SimConfig& s) {
  expect_keys(obj, path,
              {"seconds_per_token", "concurrency", "slowdown", "histogram_bin_width"});
  read_field(obj, path, "seconds_per_token", s.seconds_per_token);
  read_field(obj, path, "concurrency", s.concurrency);
  read_field(obj, path, "histogram_bin_width", s.histogram_bin_width);
  if (auto it = obj.find("slowdown"); it != obj.end()) {
    const std::string sp = path + ".slowdown";
    if (!it->is_array()) fail(sp, "expected array of [token_threshold, seconds] pairs");
    s.slowdown.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& e = (*it)[i];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        fail(sp + "[" + std::to_string(i) + "]", "expected [token_threshold, seconds]");
      }
      s.slowdown.emplace_back(e[0].get<std::uint64_t>(), e[1].get<double>());
    }
  }
}

struct OverrideTarget {
  std::string description;
  std::function<void(AppConfig&, const std::string&)> apply;
};

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    fail(key, "expected a non-negative integer, got \"" + value + "\"");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    fail(key, "expected a number, got \"" + value + "\"");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(key, "expected true/false, got \"" + value + "\"");
}

const std::map<std::string, OverrideTarget>& override_table() {
  static const std::map<std::string, OverrideTarget> table = {
      {"compression.agreement_threshold",
       {"consecutive equivalent answers before the gentle stop",
        [](AppConfig& c, const std::string& v) {
          c.compression.agreement_threshold = parse_size("compression.agreement_threshold", v);
        }}},
      {"compression.update_interval_steps",
       {"decode steps between engine updates",
        [](AppConfig& c, const std::string& v) {
          c.compression.update_interval_steps =
              parse_size("compression.update_interval_steps", v);
        }}},
      {"compression.answer_sentences",
       {"trailing sentences forming a thought's candidate answer",
        [](AppConfig& c, const std::string& v) {
          c.compression.answer_sentences = parse_size("compression.answer_sentences", v);
        }}},
      {"compression.budget_pct_threshold",
       {"percent of token_budget before the forceful-stop gate opens",
        [](AppConfig& c, const std::string& v) {
          c.compression.budget_pct_threshold =
              parse_double("compression.budget_pct_threshold", v);
        }}},
      {"compression.round_threshold",
       {"completed thoughts before the forceful-stop gate opens",
        [](AppConfig& c, const std::string& v) {
          c.compression.round_threshold = parse_size("compression.round_threshold", v);
        }}},
      {"compression.token_budget",
       {"output token budget per sequence",
        [](AppConfig& c, const std::string& v) {
          c.compression.token_budget = parse_size("compression.token_budget", v);
        }}},
      {"compression.min_thought_chars",
       {"thoughts shorter than this are never verified",
        [](AppConfig& c, const std::string& v) {
          c.compression.min_thought_chars = parse_size("compression.min_thought_chars", v);
        }}},
      {"compression.think_end_marker",
       {"literal marker closing the think phase",
        [](AppConfig& c, const std::string& v) { c.compression.think_end_marker = v; }}},
      {"compression.eos_marker",
       {"literal end-of-sequence marker",
        [](AppConfig& c, const std::string& v) { c.compression.eos_marker = v; }}},
      {"compression.enable_overthink",
       {"gentle stop on repeated equivalent answers",
        [](AppConfig& c, const std::string& v) {
          c.compression.enable_overthink = parse_bool("compression.enable_overthink", v);
        }}},
      {"compression.enable_underthink",
       {"forceful stop past the budget/round gate",
        [](AppConfig& c, const std::string& v) {
          c.compression.enable_underthink = parse_bool("compression.enable_underthink", v);
        }}},
      {"compression.enable_repetition",
       {"truncation on detected token-level loops",
        [](AppConfig& c, const std::string& v) {
          c.compression.enable_repetition = parse_bool("compression.enable_repetition", v);
        }}},
      {"compression.repetition.period_min",
       {"smallest tracked repetition period",
        [](AppConfig& c, const std::string& v) {
          c.compression.repetition.period_min =
              parse_size("compression.repetition.period_min", v);
        }}},
      {"compression.repetition.period_max",
       {"largest tracked repetition period",
        [](AppConfig& c, const std::string& v) {
          c.compression.repetition.period_max =
              parse_size("compression.repetition.period_max", v);
        }}},
      {"compression.repetition.min_repeats",
       {"full periods required before a repetition report",
        [](AppConfig& c, const std::string& v) {
          c.compression.repetition.min_repeats =
              parse_size("compression.repetition.min_repeats", v);
        }}},
      {"compression.repetition.min_span",
       {"tokens the periodic span must cover before a report",
        [](AppConfig& c, const std::string& v) {
          c.compression.repetition.min_span =
              parse_size("compression.repetition.min_span", v);
        }}},
      {"compression.repetition.window",
       {"repetition ring-buffer capacity in tokens",
        [](AppConfig& c, const std::string& v) {
          c.compression.repetition.window = parse_size("compression.repetition.window", v);
        }}},
      {"verifier.mode",
       {"verifier backend: mock or http",
        [](AppConfig& c, const std::string& v) {
          if (v == "mock") {
            c.verifier.mode = VerifierMode::kMock;
          } else if (v == "http") {
            c.verifier.mode = VerifierMode::kHttp;
          } else {
            fail("verifier.mode", "expected mock or http, got \"" + v + "\"");
          }
        }}},
      {"verifier.url",
       {"completions endpoint URL",
        [](AppConfig& c, const std::string& v) { c.verifier.url = v; }}},
      {"verifier.model",
       {"model name sent with completion requests (optional)",
        [](AppConfig& c, const std::string& v) { c.verifier.model = v; }}},
      {"verifier.timeout_ms",
       {"per-request verifier timeout in milliseconds",
        [](AppConfig& c, const std::string& v) {
          c.verifier.timeout =
              std::chrono::milliseconds(parse_size("verifier.timeout_ms", v));
        }}},
      {"verifier.top_logprobs",
       {"top-K logprobs requested for the verdict token",
        [](AppConfig& c, const std::string& v) {
          c.verifier.top_logprobs =
              static_cast<int>(parse_size("verifier.top_logprobs", v));
        }}},
      {"verifier.max_inflight",
       {"bound on queued verifier checks before shedding",
        [](AppConfig& c, const std::string& v) {
          c.verifier.max_inflight = parse_size("verifier.max_inflight", v);
        }}},
      {"verifier.use_shots",
       {"include worked examples in verifier prompts",
        [](AppConfig& c, const std::string& v) {
          c.verifier.use_shots = parse_bool("verifier.use_shots", v);
        }}},
      {"service.bind",
       {"host:port the sidecar listens on",
        [](AppConfig& c, const std::string& v) { c.service.bind = v; }}},
      {"service.vocab_path",
       {"token-id to text-piece JSON map for updates without text",
        [](AppConfig& c, const std::string& v) { c.service.vocab_path = v; }}},
      {"sim.seconds_per_token",
       {"simulated decode latency per token",
        [](AppConfig& c, const std::string& v) {
          c.sim.seconds_per_token = parse_double("sim.seconds_per_token", v);
        }}},
      {"sim.concurrency",
       {"simulated serving slots (fixed-width batch)",
        [](AppConfig& c, const std::string& v) {
          c.sim.concurrency = parse_size("sim.concurrency", v);
        }}},
      {"sim.histogram_bin_width",
       {"token-histogram bin width for reports",
        [](AppConfig& c, const std::string& v) {
          c.sim.histogram_bin_width = parse_size("sim.histogram_bin_width", v);
        }}},
  };
  return table;
}

}  // namespace

CompressionConfig default_compression_config() {
  CompressionConfig c;
  c.reflection_tokens = {"\n\nBut",
                         "\n\nWait",
                         "\n\nHowever",
                         "\n\nHmm",
                         "\n\nLet me verify this",
                         "\n\nAlternatively"};
  c.gentle_prompt =
      "\n\n I think I already thought for a long time, and I should be able to put "
      "the simple final answer after **Final Answer**\n with \\boxed{} and end "
      "thinking now!**Final Answer**\n";
  c.forceful_prompt =
      "\n\n I think I already thought for a long time, and I should be able to "
      "deduce the final answer from the content above.</think>\n\n";
  return c;
}

AppConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json root = json::parse(in, nullptr, false);
  if (root.is_discarded()) throw ConfigError(path + ": not valid JSON");
  if (!root.is_object()) throw ConfigError(path + ": top level must be an object");
  expect_keys(root, "config", {"compression", "verifier", "service", "sim"});

  AppConfig config;
  if (auto it = root.find("compression"); it != root.end()) {
    if (!it->is_object()) fail("compression", "expected object");
    read_compression(*it, "compression", config.compression);
  }
  if (auto it = root.find("verifier"); it != root.end()) {
    if (!it->is_object()) fail("verifier", "expected object");
    read_verifier(*it, "verifier", config.verifier);
  }
  if (auto it = root.find("service"); it != root.end()) {
    if (!it->is_object()) fail("service", "expected object");
    read_service(*it, "service", config.service);
  }
  if (auto it = root.find("sim"); it != root.end()) {
    if (!it->is_object()) fail("sim", "expected object");
    read_sim(*it, "sim", config.sim);
  }
  validate(config);
  return config;
}

void apply_override(AppConfig& config, const std::string& key, const std::string& value) {
  const auto& table = override_table();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key + ": unknown override key");
  it->second.apply(config, value);
}

std::vector<OverrideKeyDoc> override_keys() {
  std::vector<OverrideKeyDoc> out;
  for (const auto& [key, target] : override_table()) {
    out.push_back({key, target.description});
  }
  return out;
}

void validate(const AppConfig& config) {
  const CompressionConfig& c = config.compression;
  if (c.agreement_threshold == 0) fail("compression.agreement_threshold", "must be >= 1");
  if (c.update_interval_steps == 0) fail("compression.update_interval_steps", "must be >= 1");
  if (c.answer_sentences == 0) fail("compression.answer_sentences", "must be >= 1");
  if (c.budget_pct_threshold < 0.0 || c.budget_pct_threshold > 100.0) {
    fail("compression.budget_pct_threshold", "must be within [0, 100]");
  }
  if (c.token_budget == 0) fail("compression.token_budget", "must be >= 1");
  if (c.reflection_tokens.empty()) fail("compression.reflection_tokens", "must be non-empty");
  for (std::size_t i = 0; i < c.reflection_tokens.size(); ++i) {
    if (c.reflection_tokens[i].empty()) {
      fail("compression.reflection_tokens[" + std::to_string(i) + "]", "must be non-empty");
    }
  }
  if (c.think_end_marker.empty()) fail("compression.think_end_marker", "must be non-empty");
  if (c.eos_marker.empty()) fail("compression.eos_marker", "must be non-empty");

  const RepetitionConfig& r = c.repetition;
  if (r.period_min == 0) fail("compression.repetition.period_min", "must be >= 1");
  if (r.period_max < r.period_min) {
    fail("compression.repetition.period_max", "must be >= period_min");
  }
  if (r.min_repeats < 2) fail("compression.repetition.min_repeats", "must be >= 2");
  if (r.window < 2 * r.period_max + 2) {
    fail("compression.repetition.window",
         "must be >= 2 * period_max + 2 (= " + std::to_string(2 * r.period_max + 2) + ")");
  }

  if (config.verifier.timeout.count() <= 0) fail("verifier.timeout_ms", "must be >= 1");
  if (config.verifier.top_logprobs < 1) fail("verifier.top_logprobs", "must be >= 1");
  if (config.verifier.max_inflight == 0) fail("verifier.max_inflight", "must be >= 1");
  if (config.verifier.mode == VerifierMode::kHttp && config.verifier.url.empty()) {
    fail("verifier.url", "required when verifier.mode is http");
  }

  if (config.service.bind.find(':') == std::string::npos) {
    fail("service.bind", "expected host:port, got \"" + config.service.bind + "\"");
  }

  if (config.sim.seconds_per_token <= 0.0) fail("sim.seconds_per_token", "must be > 0");
  if (config.sim.concurrency == 0) fail("sim.concurrency", "must be >= 1");
  if (config.sim.histogram_bin_width == 0) fail("sim.histogram_bin_width", "must be >= 1");
  for (std::size_t i = 0; i + 1 < config.sim.slowdown.size(); ++i) {
    if (config.sim.slowdown[i].first >= config.sim.slowdown[i + 1].first) {
      fail("sim.slowdown[" + std::to_string(i + 1) + "]",
           "thresholds must be strictly increasing");
    }
  }
  for (std::size_t i = 0; i < config.sim.slowdown.size(); ++i) {
    if (config.sim.slowdown[i].second <= 0.0) {
      fail("sim.slowdown[" + std::to_string(i) + "]", "seconds must be > 0");
    }
  }
}

}  // namespace trimctl
