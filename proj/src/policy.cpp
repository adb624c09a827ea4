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

#include "des/policy.hpp"

#include <algorithm>
#include <array>
#include <charconv>

#include "des/errors.hpp"

namespace des {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::math: return "math";
    case TaskKind::code: return "code";
    case TaskKind::knowledge: return "knowledge";
  }
  return "math";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "math") return TaskKind::math;
  if (text == "code") return TaskKind::code;
  if (text == "knowledge") return TaskKind::knowledge;
  throw ValidationError("unknown task kind '" + std::string(text) + "'");
}

bool EffectiveKProfile::is_effective(int k) const {
  return std::binary_search(effective_ks.begin(), effective_ks.end(), k);
}

void EffectiveKProfile::validate() const {
  if (!(p_good >= 0.0 && p_good <= 1.0 && p_bad >= 0.0 && p_bad <= 1.0)) {
    throw ValidationError("profile probabilities must lie in [0, 1]");
  }
  if (p_good < p_bad) throw ValidationError("profile requires p_good >= p_bad");
  if (num_steps < 1) throw ValidationError("profile num_steps must be >= 1");
  if (!std::is_sorted(effective_ks.begin(), effective_ks.end()) ||
      std::adjacent_find(effective_ks.begin(), effective_ks.end()) != effective_ks.end()) {
    throw ValidationError("effective_ks must be sorted and distinct");
  }
  for (int k : effective_ks) {
    if (k < 1) throw ValidationError("effective_ks must be positive");
  }
}

State State::initial(const Problem& problem, int k, int max_steps) {
  if (max_steps < 1) throw InvalidConfig("max_steps must be >= 1");
  if (k < 1) throw InvalidExpertCount(k, k);
  State s;
  s.problem_id_ = problem.id;
  s.prompt_ = problem.prompt;
  s.expert_count_ = k;
  s.max_steps_ = max_steps;
  s.fingerprint_ = fnv1a64(problem.prompt, fnv1a64(problem.id));
  return s;
}

State State::extend(Step step, int k) const {
  if (terminated_) {
    throw AlreadyTerminated("state for problem " + problem_id_ + " is terminated");
  }
  State next = *this;
  step.expert_count = k;
  next.total_tokens_ += step.token_count;
  next.fingerprint_ = fnv1a64(step.text, hash_combine(fingerprint_, steps_.size()));
  next.terminated_ =
      step.is_terminal || static_cast<int>(steps_.size()) + 1 >= max_steps_;
  next.expert_count_ = k;
  next.steps_.push_back(std::move(step));
  return next;
}

bool State::all_steps_labeled_correct() const {
  return std::all_of(steps_.begin(), steps_.end(),
                     [](const Step& s) { return s.correct.value_or(false); });
}

std::string State::response_text() const {
  std::string out;
  for (const Step& s : steps_) {
    if (!out.empty() && out.back() != '\n') out.push_back('\n');
    out += s.text;
  }
  return out;
}

std::string State::full_text() const {
  if (steps_.empty()) return prompt_;
  return prompt_ + "\n" + response_text();
}

double DecodeParams::temperature_for(int k) const {
  auto it = temperature_by_k.find(k);
  return it == temperature_by_k.end() ? temperature : it->second;
}

DecodeParams DecodeParams::for_task(TaskKind kind) {
  DecodeParams d;
  if (kind != TaskKind::math) d.delimiters = {"\n\n"};
  return d;
}

void Policy::check_request(const State& state, int k) const {
  if (state.terminated()) {
    throw AlreadyTerminated("cannot extend terminated state of " + state.problem_id());
  }
  const auto [lo, hi] = expert_range();
  if (k < lo || k > hi) throw InvalidExpertCount(k, hi);
}

namespace {

constexpr std::array<std::string_view, 6> kSoundMoves = {
    "isolate the unknown term",      "substitute the known values",
    "combine like terms",            "apply the stated constraint",
    "simplify the resulting ratio",  "check the boundary case"};
constexpr std::array<std::string_view, 6> kSlipMoves = {
    "drop a sign while isolating the term", "substitute a misread value",
    "merge terms that are not alike",       "apply the constraint backwards",
    "cancel a factor that is not common",   "skip the boundary case"};

std::string wrong_answer(const std::string& gold, int answer_space, Rng& rng) {
  int gold_value = 0;
  const auto* end = gold.data() + gold.size();
  auto [ptr, ec] = std::from_chars(gold.data(), end, gold_value);
  const auto draw = rng();
  if (ec != std::errc() || ptr != end || answer_space < 2 || gold_value < 0 ||
      gold_value >= answer_space) {
    return std::to_string(answer_space + static_cast<int>(draw % 997));
  }
  int value = static_cast<int>(draw % static_cast<std::uint64_t>(answer_space - 1));
  if (value >= gold_value) ++value;
  return std::to_string(value);
}

}  // namespace

Step scripted_sample_step(const State& state, int k, const EffectiveKProfile& profile,
                          const std::string& gold_answer,
                          const ScriptedOptions& options, Rng& rng) {
  if (state.terminated()) {
    throw AlreadyTerminated("cannot extend terminated state of " + state.problem_id());
  }
  const double p = profile.is_effective(k) ? profile.p_good : profile.p_bad;
  const bool correct = uniform01(rng) < p;
  const auto phrase_draw = rng();
  const std::size_t index = static_cast<std::size_t>(state.steps().size());

  Step step;
  step.correct = correct;
  step.token_count = options.nominal_step_tokens;
  step.text = "## Step " + std::to_string(index + 1) + ": ";
  step.text += correct ? kSoundMoves[phrase_draw % kSoundMoves.size()]
                       : kSlipMoves[phrase_draw % kSlipMoves.size()];
  step.text += ".\n";

  if (static_cast<int>(index) + 1 >= profile.num_steps) {
    const bool solved = correct && state.all_steps_labeled_correct();
    const std::string answer =
        solved ? gold_answer : wrong_answer(gold_answer, options.answer_space, rng);
    step.text += "Therefore, the final answer is: $\\boxed{" + answer +
                 "}$. I hope it is correct.\n";
    step.is_terminal = true;
  }
  return step;
}

Step ScriptedPolicy::sample_step(const Problem& problem, const State& state, int k,
                                 const DecodeParams&, Rng& rng) const {
  check_request(state, k);
  if (!problem.profile) {
    throw InvalidInput("problem " + problem.id + " has no synthetic profile");
  }
  return scripted_sample_step(state, k, *problem.profile, problem.gold_answer,
                              options_, rng);
}

}  // namespace des
