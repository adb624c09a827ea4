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

#include "des/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "des/errors.hpp"
#include "des/evalkit.hpp"

namespace des {

Reward::Reward(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InvalidInput("reward " + std::to_string(value) + " outside [0, 1]");
  }
}

Reward Reward::clamped(double raw) {
  if (std::isnan(raw)) return Reward(0.0);
  return Reward(std::clamp(raw, 0.0, 1.0));
}

std::string_view to_string(AggregationMode mode) {
  switch (mode) {
    case AggregationMode::last: return "last";
    case AggregationMode::min: return "min";
    case AggregationMode::product: return "product";
  }
  return "last";
}

AggregationMode parse_aggregation_mode(std::string_view text) {
  if (text == "last") return AggregationMode::last;
  if (text == "min") return AggregationMode::min;
  if (text == "product") return AggregationMode::product;
  throw InvalidConfig("unknown aggregation mode '" + std::string(text) + "'");
}

Reward aggregate_step_scores(std::span<const double> step_scores, AggregationMode mode) {
  if (step_scores.empty()) throw InvalidInput("no step scores to aggregate");
  switch (mode) {
    case AggregationMode::last:
      return Reward::clamped(step_scores.back());
    case AggregationMode::min:
      return Reward::clamped(*std::min_element(step_scores.begin(), step_scores.end()));
    case AggregationMode::product: {
      double p = 1.0;
      for (double s : step_scores) p *= s;
      return Reward::clamped(p);
    }
  }
  return Reward{};
}

Reward ConstantVerifier::score(const Problem&, const State& state) const {
  if (state.steps().empty()) throw InvalidInput("cannot score a state with no steps");
  return value_;
}

OracleVerifier::OracleVerifier(OracleVerifierConfig config) : config_(config) {
  if (!(config.fidelity >= 0.0 && config.fidelity <= 1.0)) {
    throw InvalidConfig("oracle fidelity must lie in [0, 1]");
  }
  if (!(config.noise_sigma >= 0.0)) throw InvalidConfig("noise_sigma must be >= 0");
}

std::string OracleVerifier::name() const {
  return config_.fidelity == 1.0 && config_.noise_sigma == 0.0 ? "oracle" : "noisy";
}

bool OracleVerifier::correct_prefix(const Problem& problem, const State& state) {
  const auto& steps = state.steps();
  const bool labeled = std::all_of(steps.begin(), steps.end(),
                                   [](const Step& s) { return s.correct.has_value(); });
  if (labeled) return state.all_steps_labeled_correct();
  return answers_match(extract_answer(state.response_text(), problem.task_kind),
                       problem.gold_answer, problem.task_kind);
}

Reward OracleVerifier::score(const Problem& problem, const State& state) const {
  if (state.steps().empty()) throw InvalidInput("cannot score a state with no steps");
  const double indicator = correct_prefix(problem, state) ? 1.0 : 0.0;
  double raw = config_.fidelity * indicator;
  if (config_.fidelity < 1.0 || config_.noise_sigma > 0.0) {
    Rng rng(derive_seed(config_.seed, {fnv1a64(problem.id), state.fingerprint()}));
    raw += (1.0 - config_.fidelity) * uniform01(rng);
    if (config_.noise_sigma > 0.0) {
      // Box-Muller keeps the stream identical across standard libraries.
      const double u1 = 1.0 - uniform01(rng);
      const double u2 = uniform01(rng);
      raw += config_.noise_sigma * std::sqrt(-2.0 * std::log(u1)) *
             std::cos(2.0 * 3.14159265358979323846 * u2);
    }
  }
  return Reward::clamped(raw);
}

}  // namespace des
