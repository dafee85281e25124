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

#include <chrono>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "trimctl/verifier.hpp"

namespace trimctl::verifier {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string host_port;  // scheme://host:port
  std::string path;       // /v1/completions
};

SplitUrl split_url(const std::string& url) {
  SplitUrl out;
  const std::size_t scheme = url.find("://");
  const std::size_t path_start =
      url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    out.host_port = url;
    out.path = "/";
  } else {
    out.host_port = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  return out;
}

class HttpCompletionsEngine : public VerifierEngine {
 public:
  explicit HttpCompletionsEngine(VerifierConfig config)
      : config_(std::move(config)), url_(split_url(config_.url)) {}

  JudgeOutcome judge(const CheckRequest& request) override {
    const auto start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
      return std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::steady_clock::now() - start);
    };

    json payload = {
        {"prompt", request.prompt},
        {"max_tokens", 1},
        {"logprobs", config_.top_logprobs},
        {"temperature", 0},
    };
    if (!config_.model.empty()) payload["model"] = config_.model;

    httplib::Client client(url_.host_port);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);

    httplib::Result res = client.Post(url_.path, payload.dump(), "application/json");
    if (!res) {
      return fail(JudgeFailure::kTimeout);
    }
    if (res->status != 200) {
      return fail(JudgeFailure::kMalformed);
    }
    const json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) return fail(JudgeFailure::kMalformed);

    std::vector<TokenLogprob> top;
    if (!collect_top_logprobs(body, top)) return fail(JudgeFailure::kMalformed);
    return verdict_from_logprobs(request.kind, top, elapsed());
  }

  const char* name() const override { return "http"; }

 private:
  static JudgeOutcome fail(JudgeFailure failure) {
    JudgeOutcome outcome;
    outcome.failure = failure;
    return outcome;
  }

  // Accepts the classic completions shape
  //   choices[0].logprobs.top_logprobs[0] = {token: logprob, ...}
  // and the itemized shape
  //   choices[0].logprobs.content[0].top_logprobs = [{token, logprob}, ...].
  static bool collect_top_logprobs(const json& body, std::vector<TokenLogprob>& out) {
    const auto choices = body.find("choices");
    if (choices == body.end() || !choices->is_array() || choices->empty()) return false;
    const json& choice = (*choices)[0];
    const auto logprobs = choice.find("logprobs");
    if (logprobs == choice.end() || !logprobs->is_object()) return false;

    if (const auto top = logprobs->find("top_logprobs");
        top != logprobs->end() && top->is_array() && !top->empty() &&
        (*top)[0].is_object()) {
      for (auto it = (*top)[0].begin(); it != (*top)[0].end(); ++it) {
        if (!it.value().is_number()) return false;
        out.push_back({it.key(), it.value().get<double>()});
      }
      return true;
    }

    if (const auto content = logprobs->find("content");
        content != logprobs->end() && content->is_array() && !content->empty()) {
      const auto top = (*content)[0].find("top_logprobs");
      if (top == (*content)[0].end() || !top->is_array()) return false;
      for (const json& entry : *top) {
        if (!entry.is_object() || !entry.contains("token") ||
            !entry.contains("logprob") || !entry["logprob"].is_number()) {
          return false;
        }
        out.push_back({entry["token"].get<std::string>(), entry["logprob"].get<double>()});
      }
      return true;
    }
    return false;
  }

  VerifierConfig config_;
  SplitUrl url_;
};

}  // namespace

std::unique_ptr<VerifierEngine> make_http_engine(const VerifierConfig& config) {
  return std::make_unique<HttpCompletionsEngine>(config);
}

std::unique_ptr<VerifierEngine> make_engine(const VerifierConfig& config) {
  if (config.mode == VerifierMode::kHttp) return make_http_engine(config);
  return std::make_unique<RuleMockEngine>();
}

}  // namespace trimctl::verifier
