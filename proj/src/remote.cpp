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

#include "des/remote.hpp"

#include <cstdlib>
#include <thread>

#include <spdlog/spdlog.h>

#include "des/errors.hpp"
#include "httplib.h"

namespace des {

using nlohmann::json;

RemoteEndpoint RemoteEndpoint::from_env(const std::string& prefix) {
  const auto get = [&](const char* suffix) -> std::string {
    const char* v = std::getenv((prefix + suffix).c_str());
    return v ? std::string(v) : std::string();
  };
  RemoteEndpoint e;
  e.url = get("_URL");
  if (e.url.empty()) throw InvalidConfig(prefix + "_URL is not set");
  e.bearer_token = get("_TOKEN");
  if (auto model = get("_MODEL"); !model.empty()) e.model = model;
  if (auto limit = get("_MAX_IN_FLIGHT"); !limit.empty()) {
    e.max_in_flight = std::max(1, std::atoi(limit.c_str()));
  }
  return e;
}

JsonHttpClient::JsonHttpClient(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  const std::string scheme = "http://";
  if (endpoint_.url.rfind(scheme, 0) != 0) {
    throw InvalidConfig("endpoint url must start with http://: " + endpoint_.url);
  }
  const std::size_t slash = endpoint_.url.find('/', scheme.size());
  base_ = endpoint_.url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : endpoint_.url.substr(slash);
  if (endpoint_.max_in_flight < 1 || endpoint_.max_in_flight > 4096) {
    throw InvalidConfig("max_in_flight must lie in [1, 4096]");
  }
  if (endpoint_.max_retries < 0) throw InvalidConfig("max_retries must be >= 0");
  in_flight_ = std::make_unique<std::counting_semaphore<4096>>(endpoint_.max_in_flight);
}

JsonHttpClient::~JsonHttpClient() = default;

JsonResponse JsonHttpClient::post(const json& request) const {
  const std::string payload = request.dump(-1, ' ', false, json::error_handler_t::replace);
  httplib::Headers headers;
  if (!endpoint_.bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint_.bearer_token);
  }

  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<4096>* sem;
    ~Release() { sem->release(); }
  } release{in_flight_.get()};

  int status = 0;
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
        endpoint_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(path_, headers, payload, "application/json");
    std::string reason;
    if (!res) {
      status = 0;
      reason = "transport failure: " + httplib::to_string(res.error());
    } else {
      status = res->status;
      if (status >= 200 && status < 300) {
        try {
          return JsonResponse{json::parse(res->body), attempt};
        } catch (const json::exception& e) {
          throw ProtocolError(std::string("response is not JSON: ") + e.what());
        }
      }
      if (status < 500) {
        throw BackendError("request to " + endpoint_.url + " rejected", status, attempt);
      }
      reason = "server error";
    }
    if (attempt >= endpoint_.max_retries) {
      throw BackendError(reason + " from " + endpoint_.url, status, attempt);
    }
    spdlog::warn("{} from {}, retry {}/{}", reason, endpoint_.url, attempt + 1,
                 endpoint_.max_retries);
    if (endpoint_.backoff.count() > 0) {
      std::this_thread::sleep_for(endpoint_.backoff * (1 << std::min(attempt, 6)));
    }
  }
}

RemotePolicy::RemotePolicy(RemoteEndpoint endpoint) : client_(std::move(endpoint)) {}

std::pair<int, int> RemotePolicy::expert_range() const {
  return {client_.endpoint().k_min, client_.endpoint().k_max};
}

json RemotePolicy::build_request(const std::string& model, const State& state, int k,
                                 const DecodeParams& decode, std::uint64_t seed) {
  json stop = json::array();
  for (const auto& d : decode.delimiters) stop.push_back(d);
  return json{{"model", model},
              {"prompt", state.full_text()},
              {"stop", stop},
              {"temperature", decode.temperature_for(k)},
              {"max_tokens", decode.max_step_tokens},
              {"num_experts", k},
              {"seed", seed}};
}

Step RemotePolicy::parse_response(const json& body) {
  if (!body.is_object() || !body.contains("text") || !body["text"].is_string() ||
      !body.contains("tokens") || !body["tokens"].is_number_integer() ||
      !body.contains("finished") || !body["finished"].is_boolean()) {
    throw ProtocolError("generation response needs {text: string, tokens: int, finished: bool}");
  }
  Step step;
  step.text = body["text"].get<std::string>();
  step.token_count = body["tokens"].get<int>();
  step.is_terminal = body["finished"].get<bool>();
  if (step.token_count < 0) throw ProtocolError("negative token count");
  return step;
}

Step RemotePolicy::sample_step(const Problem&, const State& state, int k,
                               const DecodeParams& decode, Rng& rng) const {
  check_request(state, k);
  const json request = build_request(client_.endpoint().model, state, k, decode, rng());
  JsonResponse response = client_.post(request);
  retries_ += response.retries;
  Step step = parse_response(response.body);
  // Servers may echo a stop string; keep only the text before it.
  for (const auto& d : decode.delimiters) {
    const std::size_t pos = step.text.find(d, 1);
    if (pos != std::string::npos) step.text.resize(pos);
  }
  return step;
}

RemotePrmVerifier::RemotePrmVerifier(RemoteEndpoint endpoint, AggregationMode mode)
    : client_(std::move(endpoint)), mode_(mode) {}

json RemotePrmVerifier::build_request(const State& state) {
  json steps = json::array();
  for (const Step& s : state.steps()) steps.push_back(s.text);
  return json{{"prompt", state.prompt()}, {"steps", steps}};
}

std::vector<double> RemotePrmVerifier::parse_scores(const json& body,
                                                    std::size_t expected_steps) {
  if (!body.is_object() || !body.contains("step_scores") || !body["step_scores"].is_array()) {
    throw ProtocolError("reward response needs {step_scores: [real]}");
  }
  const json& arr = body["step_scores"];
  if (arr.empty()) throw ProtocolError("reward response has no step scores");
  if (arr.size() != expected_steps) {
    throw ProtocolError("reward response has " + std::to_string(arr.size()) +
                        " scores for " + std::to_string(expected_steps) + " steps");
  }
  std::vector<double> scores;
  scores.reserve(arr.size());
  for (const json& v : arr) {
    if (!v.is_number()) throw ProtocolError("step score is not a number");
    double s = v.get<double>();
    if (!(s >= 0.0 && s <= 1.0)) {
      spdlog::warn("step score {} outside [0, 1], clamped", s);
      s = Reward::clamped(s).value();
    }
    scores.push_back(s);
  }
  return scores;
}

Reward RemotePrmVerifier::score(const Problem&, const State& state) const {
  if (state.steps().empty()) throw InvalidInput("cannot score a state with no steps");
  const JsonResponse response = client_.post(build_request(state));
  const std::vector<double> scores = parse_scores(response.body, state.steps().size());
  return aggregate_step_scores(scores, mode_);
}

}  // namespace des
