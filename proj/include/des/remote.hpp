// Copyright 2026 The DES Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON-over-HTTP seams to a served MoE policy and a served process reward
// model.
//
// Policy:   POST {model, prompt, stop, temperature, max_tokens, num_experts, seed}
//           -> {text, tokens, finished}
// Verifier: POST {prompt, steps: [string]} -> {step_scores: [real]}

#include <atomic>
#include <chrono>
#include <memory>
#include <semaphore>
#include <string>

#include "des/policy.hpp"
#include "des/verifier.hpp"
#include "json.hpp"

namespace des {

struct RemoteEndpoint {
  std::string url;  // http://host:port/path
  std::string bearer_token;
  std::string model = "default";
  int max_retries = 3;
  int max_in_flight = 8;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds backoff{200};
  int k_min = 1;
  int k_max = 64;

  // Reads <PREFIX>_URL (required), <PREFIX>_TOKEN, <PREFIX>_MODEL,
  // <PREFIX>_MAX_IN_FLIGHT.
  static RemoteEndpoint from_env(const std::string& prefix);
};

struct JsonResponse {
  nlohmann::json body;
  int retries = 0;
};

// Posts JSON with bounded retries on 5xx and transport failures, and a cap on
// concurrent requests.
class JsonHttpClient {
 public:
  explicit JsonHttpClient(RemoteEndpoint endpoint);
  ~JsonHttpClient();

  JsonResponse post(const nlohmann::json& request) const;
  const RemoteEndpoint& endpoint() const { return endpoint_; }

 private:
  RemoteEndpoint endpoint_;
  std::string base_;
  std::string path_;
  std::unique_ptr<std::counting_semaphore<4096>> in_flight_;
};

class RemotePolicy final : public Policy {
 public:
  explicit RemotePolicy(RemoteEndpoint endpoint);

  Step sample_step(const Problem& problem, const State& state, int k,
                   const DecodeParams& decode, Rng& rng) const override;
  std::pair<int, int> expert_range() const override;
  std::string name() const override { return "remote"; }

  static nlohmann::json build_request(const std::string& model, const State& state, int k,
                                      const DecodeParams& decode, std::uint64_t seed);
  static Step parse_response(const nlohmann::json& body);

  std::int64_t total_retries() const { return retries_.load(); }

 private:
  JsonHttpClient client_;
  mutable std::atomic<std::int64_t> retries_{0};
};

class RemotePrmVerifier final : public Verifier {
 public:
  RemotePrmVerifier(RemoteEndpoint endpoint, AggregationMode mode = AggregationMode::last);

  Reward score(const Problem& problem, const State& state) const override;
  std::string name() const override { return "remote"; }

  static nlohmann::json build_request(const State& state);
  // Validates and clamps; warns on out-of-range scores.
  static std::vector<double> parse_scores(const nlohmann::json& body,
                                          std::size_t expected_steps);

 private:
  JsonHttpClient client_;
  AggregationMode mode_;
};

}  // namespace des
