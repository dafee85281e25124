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
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trimctl {

// Thrown for unreadable/invalid config files and bad override keys. The
// message always names the offending field path (e.g. "compression.token_budget").
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Tunables for the token-level repetition detector.
struct RepetitionConfig {
  std::size_t period_min = 1;
  std::size_t period_max = 64;
  // A report fires once the trailing periodic span covers at least
  // `min_repeats` full periods and at least `min_span` tokens.
  std::size_t min_repeats = 8;
  std::size_t min_span = 64;
  // Ring buffer capacity; must exceed 2 * period_max + 1.
  std::size_t window = 4096;
};

// Everything the stop controller needs to decide when to intervene.
// Defaults are the shipped operating point; all fields are overridable
// through the config file, --set, or per-sequence register overrides.
struct CompressionConfig {
  // Consecutive equivalent concluded answers required before the gentle
  // wrap-up prompt is issued.
  std::size_t agreement_threshold = 2;
  // Decode steps between engine-to-sidecar updates (one token per step).
  std::size_t update_interval_steps = 50;
  // Trailing sentences of a thought that form its candidate answer.
  std::size_t answer_sentences = 3;
  // The forceful-stop gate opens once generated tokens exceed this percent
  // of token_budget...
  double budget_pct_threshold = 50.0;
  // ...and the number of completed thoughts exceeds this count.
  std::size_t round_threshold = 20;
  std::size_t token_budget = 30000;
  // Thoughts shorter than this many chars are never sent for verification.
  std::size_t min_thought_chars = 80;

  // Literal separators that end one thought and open the next.
  std::vector<std::string> reflection_tokens;
  std::string think_end_marker = "</think>";
  std::string eos_marker = "<eos>";

  // Forced continuations. The gentle prompt nudges the model to conclude and
  // keeps it generating; the forceful prompt closes the think phase itself.
  std::string gentle_prompt;
  std::string forceful_prompt;

  // Ablation switches; all on for normal operation.
  bool enable_overthink = true;
  bool enable_underthink = true;
  bool enable_repetition = true;

  RepetitionConfig repetition;
};

// CompressionConfig populated with the shipped defaults (reflection tokens
// and prompt texts included).
CompressionConfig default_compression_config();

enum class VerifierMode { kMock, kHttp };

struct VerifierConfig {
  VerifierMode mode = VerifierMode::kMock;
  std::string url = "http://127.0.0.1:8000/v1/completions";
  std::string model;  // optional "model" field for the completions payload
  std::chrono::milliseconds timeout{2000};
  int top_logprobs = 20;
  // Checks queued beyond this bound shed the oldest pending equivalence
  // check instead of blocking the token path.
  std::size_t max_inflight = 64;
  bool use_shots = true;
};

struct ServiceConfig {
  std::string bind = "127.0.0.1:7133";
  // Optional token-id -> piece JSON map; when absent, updates must carry text.
  std::string vocab_path;
};

struct SimConfig {
  double seconds_per_token = 0.05;
  std::size_t concurrency = 16;
  // Optional piecewise per-token slowdown: (token index threshold, seconds).
  // The entry with the largest threshold <= index applies.
  std::vector<std::pair<std::uint64_t, double>> slowdown;
  std::size_t histogram_bin_width = 1000;
};

struct AppConfig {
  CompressionConfig compression = default_compression_config();
  VerifierConfig verifier;
  ServiceConfig service;
  SimConfig sim;
};

// Loads and validates a JSON config file. Unknown keys are errors; absent
// keys keep their defaults. Throws ConfigError with a field path.
AppConfig load_config_file(const std::string& path);

// Applies one "section.key=value" override (the --set grammar). Throws
// ConfigError naming the key for unknown keys or unparsable values.
void apply_override(AppConfig& config, const std::string& key, const std::string& value);

// Key/description pairs for every override target, for --help output.
struct OverrideKeyDoc {
  std::string key;
  std::string description;
};
std::vector<OverrideKeyDoc> override_keys();

// Range/consistency checks shared by file loading and overrides.
// Throws ConfigError with a field path.
void validate(const AppConfig& config);

}  // namespace trimctl
