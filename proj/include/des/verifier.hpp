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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "des/policy.hpp"
#include "des/problem.hpp"

namespace des {

// A verifier score in [0, 1].
class Reward {
 public:
  Reward() = default;
  // Throws InvalidInput outside [0, 1].
  explicit Reward(double value);
  // Clamps into [0, 1]; NaN becomes 0.
  static Reward clamped(double raw);

  double value() const { return value_; }
  auto operator<=>(const Reward&) const = default;

 private:
  double value_ = 0.0;
};

enum class AggregationMode { last, min, product };

std::string_view to_string(AggregationMode mode);
AggregationMode parse_aggregation_mode(std::string_view text);

// Reduces per-step process scores to a trajectory reward.
Reward aggregate_step_scores(std::span<const double> step_scores, AggregationMode mode);

class Verifier {
 public:
  virtual ~Verifier() = default;
  // Deterministic for a given verifier and state; never mutates the state.
  // Throws InvalidInput when the state has no steps.
  virtual Reward score(const Problem& problem, const State& state) const = 0;
  virtual std::string name() const = 0;
};

class ConstantVerifier final : public Verifier {
 public:
  explicit ConstantVerifier(double value = 0.5) : value_(value) {}
  Reward score(const Problem& problem, const State& state) const override;
  std::string name() const override { return "constant"; }

 private:
  Reward value_;
};

struct OracleVerifierConfig {
  double fidelity = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

// Ground-truth verifier with controllable quality:
//   raw = fidelity * correct + (1 - fidelity) * u + N(0, noise_sigma^2)
// where u ~ U[0,1) and the gaussian are drawn from a stream keyed by
// (seed, problem id, state fingerprint), then clamped to [0, 1].
//
// `correct` is 1 when every step carries a positive ground-truth label. For
// unlabeled states it falls back to comparing the extracted answer to gold.
class OracleVerifier final : public Verifier {
 public:
  explicit OracleVerifier(OracleVerifierConfig config = {});
  Reward score(const Problem& problem, const State& state) const override;
  std::string name() const override;

  static bool correct_prefix(const Problem& problem, const State& state);

 private:
  OracleVerifierConfig config_;
};

}  // namespace des
