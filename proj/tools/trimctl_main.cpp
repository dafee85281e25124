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

// Operator entry point. Subcommands:
//   serve       run the sidecar on a TCP NDJSON endpoint
//   simulate    replay a trace corpus with compression off and on
//   gen-corpus  synthesize trace corpora
//   analyze     histograms and flag report from replay logs
//   capacity    deployment sizing arithmetic
//
// Exit codes: 0 success, 1 runtime/config/trace failure, 2 usage error.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trimctl/config.hpp"
#include "trimctl/server.hpp"
#include "trimctl/service.hpp"
#include "trimctl/sim.hpp"

namespace {

trimctl::NdjsonServer* g_server = nullptr;

extern "C" void handle_stop_signal(int) {
  // request_stop is async-signal-safe; the run() loop does the teardown.
  if (g_server != nullptr) g_server->request_stop();
}

struct CommonConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

std::string override_help() {
  std::string help = "Override one config value (repeatable). Keys:";
  for (const auto& doc : trimctl::override_keys()) {
    help += "\n  " + doc.key + "  " + doc.description;
  }
  return help;
}

void add_config_options(CLI::App* cmd, CommonConfigArgs* args) {
  cmd->add_option("--config", args->config_path, "JSON config file");
  cmd->add_option("--set", args->overrides, override_help());
}

trimctl::AppConfig build_config(const CommonConfigArgs& args) {
  trimctl::AppConfig config;
  if (!args.config_path.empty()) {
    config = trimctl::load_config_file(args.config_path);
  }
  for (const auto& kv : args.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw trimctl::ConfigError("--set expects key=value, got: " + kv);
    }
    trimctl::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << content;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------

int run_serve(const CommonConfigArgs& config_args, const std::string& bind,
              const std::string& verifier_url, bool mock_verifier) {
  auto config = build_config(config_args);
  if (!bind.empty()) config.service.bind = bind;
  if (!verifier_url.empty()) {
    config.verifier.url = verifier_url;
    config.verifier.mode = trimctl::VerifierMode::kHttp;
  }
  if (mock_verifier) config.verifier.mode = trimctl::VerifierMode::kMock;
  trimctl::validate(config);

  trimctl::Service service(config);
  trimctl::NdjsonServer server(service, config.service.bind);
  g_server = &server;
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);

  bool ok = server.start([](const std::string& address) {
    std::printf("listening on %s\n", address.c_str());
    std::fflush(stdout);
  });
  if (!ok) return 1;
  server.run();
  g_server = nullptr;

  auto stats = service.stats();
  std::fprintf(stderr,
               "served %llu updates, %llu tokens, %llu flags, %llu checks "
               "(%llu failed)\n",
               static_cast<unsigned long long>(stats.updates_handled),
               static_cast<unsigned long long>(stats.tokens_ingested),
               static_cast<unsigned long long>(stats.flags_issued),
               static_cast<unsigned long long>(stats.checks_submitted),
               static_cast<unsigned long long>(stats.check_failures));
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<trimctl::sim::ReasoningTrace> make_corpus(const std::string& kind,
                                                      std::uint32_t seed, int traces,
                                                      int segments, int segment_tokens,
                                                      int summary_tokens) {
  auto apply = [&](auto params) {
    if (traces > 0) params.traces = traces;
    if (segments > 0) params.segments = segments;
    if (segment_tokens > 0) params.segment_tokens = segment_tokens;
    if (summary_tokens > 0) params.summary_tokens = summary_tokens;
    return params;
  };
  if (kind == "overthink") {
    return trimctl::sim::gen_overthink_corpus(apply(trimctl::sim::OverthinkCorpusParams{}),
                                              seed);
  }
  if (kind == "underthink") {
    return trimctl::sim::gen_underthink_corpus(
        apply(trimctl::sim::UnderthinkCorpusParams{}), seed);
  }
  if (kind == "benign") {
    return trimctl::sim::gen_benign_corpus(apply(trimctl::sim::BenignCorpusParams{}), seed);
  }
  if (kind == "repetition") {
    return trimctl::sim::gen_repetition_corpus(
        apply(trimctl::sim::RepetitionCorpusParams{}), seed);
  }
  if (kind == "mixed") return trimctl::sim::gen_mixed_corpus(seed);
  if (kind == "exemplars") return trimctl::sim::exemplar_traces();
  throw trimctl::sim::TraceError("unknown corpus kind: " + kind);
}

int run_simulate(const CommonConfigArgs& config_args, const std::string& corpus_path,
                 const std::string& bundled_kind, std::uint32_t seed,
                 const std::string& out_dir) {
  auto config = build_config(config_args);
  trimctl::validate(config);

  std::vector<trimctl::sim::ReasoningTrace> traces;
  if (!corpus_path.empty()) {
    traces = trimctl::sim::load_traces(corpus_path);
  } else {
    traces = make_corpus(bundled_kind, seed, 0, 0, 0, 0);
  }
  if (traces.empty()) {
    std::fprintf(stderr, "no traces\n");
    return 1;
  }

  auto outcome = trimctl::sim::run_simulation(traces, config);

  std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "baseline.jsonl", trimctl::sim::run_log_jsonl(outcome.baseline_log));
  write_file(dir / "compressed.jsonl",
             trimctl::sim::run_log_jsonl(outcome.compressed_log));
  write_file(dir / "baseline_metrics.csv", trimctl::sim::metrics_csv(outcome.baseline));
  write_file(dir / "compressed_metrics.csv",
             trimctl::sim::metrics_csv(outcome.compressed));
  write_file(dir / "histograms.json",
             trimctl::sim::histogram_json(&outcome.baseline, &outcome.compressed));
  std::string summary = trimctl::sim::comparison_text(outcome.baseline, outcome.compressed);
  write_file(dir / "summary.txt", summary);
  std::fputs(summary.c_str(), stdout);
  return 0;
}

int run_gen_corpus(const std::string& kind, std::uint32_t seed, const std::string& out,
                   int traces, int segments, int segment_tokens, int summary_tokens) {
  auto corpus = make_corpus(kind, seed, traces, segments, segment_tokens, summary_tokens);
  trimctl::sim::save_traces(out, corpus);
  std::printf("wrote %zu traces to %s\n", corpus.size(), out.c_str());
  return 0;
}

int run_analyze(const CommonConfigArgs& config_args, const std::string& log_path,
                const std::string& baseline_path, std::size_t bin_width,
                const std::string& out_dir) {
  auto config = build_config(config_args);
  if (bin_width > 0) config.sim.histogram_bin_width = bin_width;
  trimctl::validate(config);

  auto read_log = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw trimctl::sim::TraceError(path + ": cannot open");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return trimctl::sim::parse_run_log_jsonl(buffer.str());
  };

  auto log = read_log(log_path);
  auto metrics = trimctl::sim::compute_metrics(log, config.sim);

  std::string histograms;
  std::string report;
  if (!baseline_path.empty()) {
    auto baseline_log = read_log(baseline_path);
    auto baseline = trimctl::sim::compute_metrics(baseline_log, config.sim);
    histograms = trimctl::sim::histogram_json(&baseline, &metrics);
    report = trimctl::sim::comparison_text(baseline, metrics);
  } else {
    histograms = trimctl::sim::histogram_json(&metrics, nullptr);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "sequences %zu, tokens %ld, flags overthink=%ld underthink=%ld "
                  "repetition=%ld\n",
                  log.sequences.size(), metrics.tokens_total, metrics.flags_overthink,
                  metrics.flags_underthink, metrics.flags_repetition);
    report = buf;
  }

  if (!out_dir.empty()) {
    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "histograms.json", histograms);
    write_file(dir / "report.txt", report);
  } else {
    std::fputs(histograms.c_str(), stdout);
  }
  std::fputs(report.c_str(), stdout);
  return 0;
}

int run_capacity(double reasoner_rps, double verifier_rps, double reasoner_accel,
                 double verifier_accel, double ratio) {
  auto ideal = trimctl::sim::capacity_ratio(reasoner_rps, verifier_rps, reasoner_accel,
                                            verifier_accel, 1.0)
                   .ideal_ratio;
  double deploy = ratio > 0.0 ? ratio : static_cast<double>(ideal);
  auto report = trimctl::sim::capacity_ratio(reasoner_rps, verifier_rps, reasoner_accel,
                                             verifier_accel, deploy);
  std::printf("ideal reasoner:verifier request ratio = %ld:1\n", report.ideal_ratio);
  std::printf("deploy ratio %.0f:1 -> accelerator efficiency %.4f (%.1f%%)\n", deploy,
              report.efficiency, report.efficiency * 100.0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trimctl: dynamic reasoning-compression sidecar and simulator"};
  app.require_subcommand(1);

  CommonConfigArgs serve_config;
  std::string serve_bind, serve_verifier_url;
  bool serve_mock = false;
  auto* serve_cmd = app.add_subcommand("serve", "Run the sidecar NDJSON/TCP endpoint");
  add_config_options(serve_cmd, &serve_config);
  serve_cmd->add_option("--bind", serve_bind, "host:port to listen on")
      ->envname("TRIMCTL_BIND");
  serve_cmd->add_option("--verifier-url", serve_verifier_url,
                        "OpenAI-compatible completions endpoint")
      ->envname("TRIMCTL_VERIFIER_URL");
  serve_cmd->add_flag("--mock-verifier", serve_mock,
                      "Use the deterministic rule-based verifier");

  CommonConfigArgs sim_config;
  std::string sim_corpus_path, sim_bundled = "mixed", sim_out = "sim-out";
  std::uint32_t sim_seed = 1234;
  auto* sim_cmd =
      app.add_subcommand("simulate", "Replay a corpus with compression off and on");
  add_config_options(sim_cmd, &sim_config);
  sim_cmd->add_option("--corpus", sim_corpus_path, "Trace corpus JSON file");
  sim_cmd->add_option("--bundled", sim_bundled,
                      "Bundled corpus when --corpus is absent")
      ->check(CLI::IsMember(
          {"overthink", "underthink", "benign", "repetition", "mixed", "exemplars"}));
  sim_cmd->add_option("--seed", sim_seed, "Corpus generator seed");
  sim_cmd->add_option("--out", sim_out, "Output directory");

  std::string gen_kind = "mixed", gen_out = "corpus.json";
  std::uint32_t gen_seed = 1234;
  int gen_traces = 0, gen_segments = 0, gen_segment_tokens = 0, gen_summary_tokens = 0;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Synthesize a trace corpus");
  gen_cmd->add_option("--kind", gen_kind, "Corpus shape")
      ->check(CLI::IsMember(
          {"overthink", "underthink", "benign", "repetition", "mixed", "exemplars"}));
  gen_cmd->add_option("--seed", gen_seed, "Generator seed");
  gen_cmd->add_option("--out", gen_out, "Output file");
  gen_cmd->add_option("--traces", gen_traces,
                      "Trace count (0 keeps the default; mixed and exemplars are "
                      "fixed shapes)");
  gen_cmd->add_option("--segments", gen_segments, "Segments per trace");
  gen_cmd->add_option("--segment-tokens", gen_segment_tokens, "Tokens per segment");
  gen_cmd->add_option("--summary-tokens", gen_summary_tokens, "Tokens in the summary");

  CommonConfigArgs analyze_config;
  std::string analyze_log, analyze_baseline, analyze_out;
  std::size_t analyze_bin_width = 0;
  auto* analyze_cmd =
      app.add_subcommand("analyze", "Histograms and flag report from a replay log");
  add_config_options(analyze_cmd, &analyze_config);
  analyze_cmd->add_option("--log", analyze_log, "Replay log (JSONL)")->required();
  analyze_cmd->add_option("--baseline", analyze_baseline,
                          "Baseline log to compare against");
  analyze_cmd->add_option("--bin-width", analyze_bin_width,
                          "Token histogram bin width (0 keeps the config value)");
  analyze_cmd->add_option("--out", analyze_out, "Output directory (default: stdout)");

  double cap_reasoner_rps = 9.0, cap_verifier_rps = 128.0;
  double cap_reasoner_accel = 8.0, cap_verifier_accel = 1.0, cap_ratio = 0.0;
  auto* cap_cmd = app.add_subcommand("capacity", "Deployment sizing arithmetic");
  cap_cmd->add_option("--lrm-rps", cap_reasoner_rps, "Reasoner requests per second");
  cap_cmd->add_option("--verifier-rps", cap_verifier_rps, "Verifier requests per second");
  cap_cmd->add_option("--lrm-accel", cap_reasoner_accel,
                      "Accelerators per reasoner instance");
  cap_cmd->add_option("--verifier-accel", cap_verifier_accel,
                      "Accelerators per verifier instance");
  cap_cmd->add_option("--ratio", cap_ratio,
                      "Deployed reasoner:verifier ratio (0: use the ideal)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (serve_cmd->parsed()) {
      return run_serve(serve_config, serve_bind, serve_verifier_url, serve_mock);
    }
    if (sim_cmd->parsed()) {
      return run_simulate(sim_config, sim_corpus_path, sim_bundled, sim_seed, sim_out);
    }
    if (gen_cmd->parsed()) {
      return run_gen_corpus(gen_kind, gen_seed, gen_out, gen_traces, gen_segments,
                            gen_segment_tokens, gen_summary_tokens);
    }
    if (analyze_cmd->parsed()) {
      return run_analyze(analyze_config, analyze_log, analyze_baseline, analyze_bin_width,
                         analyze_out);
    }
    if (cap_cmd->parsed()) {
      return run_capacity(cap_reasoner_rps, cap_verifier_rps, cap_reasoner_accel,
                          cap_verifier_accel, cap_ratio);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
