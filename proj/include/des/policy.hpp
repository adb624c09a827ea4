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

// The step generator pi(. | s, k): given a partial solution and an expert
// count, produce the next reasoning step.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "des/moe.hpp"
#include "des/problem.hpp"
#include "des/seed.hpp"

namespace des {

struct Step {
  std::string text;
  int token_count = 0;
  bool is_terminal = false;
  // Set by the search: the expert count that generated this step.
  int expert_count = 0;
  // Ground-truth label, only known to synthetic backends.
  std::optional<bool> correct;
};

// A partial trajectory. Value type; extend() returns a new state.
class State {
 public:
  static State initial(const Problem& problem, int k, int max_steps);

  // Appends a step generated with `k` experts.
  State extend(Step step, int k) const;

  const std::string& problem_id() const { return problem_id_; }
  const std::string& prompt() const { return prompt_; }
  const std::vector<Step>& steps() const { return steps_; }
  int expert_count() const { return expert_count_; }
  bool terminated() const { return terminated_; }
  std::int64_t total_tokens() const { return total_tokens_; }
  int max_steps() const { return max_steps_; }
  // Stable hash of prompt and step texts.
  std::uint64_t fingerprint() const { return fingerprint_; }
  // True when every step carries correct == true (false if any is unlabeled).
  bool all_steps_labeled_correct() const;

  // Steps joined into one response; a newline separates steps that do not
  // already end with one.
  std::string response_text() const;
  // Prompt followed by the response, as fed to a generator.
  std::string full_text() const;

 private:
  std::string problem_id_;
  std::string prompt_;
  std::vector<Step> steps_;
  int expert_count_ = 0;
  bool terminated_ = false;
  std::int64_t total_tokens_ = 0;
  int max_steps_ = 0;
  std::uint64_t fingerprint_ = 0;
};

struct DecodeParams {
  double temperature = 0.8;
  // Escape hatch: per-expert-count temperature overrides.
  std::map<int, double> temperature_by_k;
  int max_step_tokens = 256;
  // A step ends when one of these appears after its first character.
  std::vector<std::string> delimiters{"\n## Step"};

  double temperature_for(int k) const;
  static DecodeParams for_task(TaskKind kind);
};

class Policy {
 public:
  virtual ~Policy() = default;

  // Must be safe to call concurrently. Same (state, k, rng state) gives the
  // same Step.
  virtual Step sample_step(const Problem& problem, const State& state, int k,
                           const DecodeParams& decode, Rng& rng) const = 0;

  // Inclusive range of accepted expert counts.
  virtual std::pair<int, int> expert_range() const = 0;
  virtual std::string name() const = 0;

 protected:
  void check_request(const State& state, int k) const;
};

struct ScriptedOptions {
  int nominal_step_tokens = 32;
  int answer_space = 100;  // wrong answers drawn from [0, answer_space)
  int max_k = 1024;
};

// One synthetic step. Correct with p_good when k is effective, else p_bad;
// the final answer is gold only if every step of the trajectory was correct.
Step scripted_sample_step(const State& state, int k, const EffectiveKProfile& profile,
                          const std::string& gold_answer,
                          const ScriptedOptions& options, Rng& rng);

class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(ScriptedOptions options = {}) : options_(options) {}

  Step sample_step(const Problem& problem, const State& state, int k,
                   const DecodeParams& decode, Rng& rng) const override;
  std::pair<int, int> expert_range() const override { return {1, options_.max_k}; }
  std::string name() const override { return "synthetic"; }

 private:
  ScriptedOptions options_;
};

// Byte-level tokenizer for the toy model.
struct ByteTokenizer {
  static constexpr int kEos = 0;
  static constexpr int kBos = 1;
  static constexpr int kByteOffset = 2;
  static constexpr int kVocabSize = 258;

  static std::vector<int> encode(const std::string& text);
  static char decode(int token);
};

class ToyMoePolicy final : public Policy {
 public:
  explicit ToyMoePolicy(std::shared_ptr<const moe::ModelWeights> weights);

  Step sample_step(const Problem& problem, const State& state, int k,
                   const DecodeParams& decode, Rng& rng) const override;
  std::pair<int, int> expert_range() const override {
    return {1, weights_->config().num_experts};
  }
  std::string name() const override { return "toy"; }

 private:
  std::shared_ptr<const moe::ModelWeights> weights_;
};

}  // namespace des
