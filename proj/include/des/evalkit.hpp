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

// Answer extraction, voting, and the evaluation metrics.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "des/problem.hpp"
#include "des/verifier.hpp"

namespace des {

struct Rollout {
  std::string problem_id;
  std::string final_text;
  std::optional<std::string> extracted_answer;
  Reward reward;
  int k = 0;                   // expert count of the final step
  std::int64_t tokens = 0;
  int steps_taken = 0;
  std::vector<int> step_ks;    // expert count per step, in order
  bool finished = false;       // ended on a terminal step, not by truncation
  int subtree = -1;            // DVTS subtree, -1 elsewhere
};

// math: last \boxed{...} (brace-matched), else the text after the last
// "final answer is $" up to the closing "$".
// code: body of the last fenced block, language tag dropped.
// knowledge: body of the last <solution>...</solution>.
std::optional<std::string> extract_answer(std::string_view text, TaskKind kind);

// Bucket key used for voting and grading. Whole-string integers, decimals
// and p/q ratios collapse to a reduced rational; anything else compares
// exactly after trimming (and stripping "$" outside code).
std::string canonical_answer(std::string_view answer, TaskKind kind);

bool answers_match(const std::optional<std::string>& answer, std::string_view gold,
                   TaskKind kind);

// Modal canonical answer. Count ties go to the larger summed reward, then to
// the bucket seen first. Returns the first raw answer of the winning bucket,
// or nullopt when nothing was extracted.
std::optional<std::string> majority_vote(std::span<const Rollout> rollouts,
                                         TaskKind kind = TaskKind::math);

// Index of the highest-reward rollout; lowest index wins ties.
std::size_t select_by_reward(std::span<const Rollout> rollouts);

struct ProblemResult {
  std::string problem_id;
  std::vector<Rollout> rollouts;
  std::optional<std::string> vote_answer;
  std::optional<std::string> reward_answer;
  std::string gold_answer;
  TaskKind task_kind = TaskKind::math;
  bool solved_by_vote = false;
  bool solved_by_reward = false;
  bool solved_any = false;

  static ProblemResult from_rollouts(std::string problem_id, std::string gold_answer,
                                     TaskKind kind, std::vector<Rollout> rollouts);
  bool rollout_correct(std::size_t index) const;
  std::size_t correct_count() const;
};

struct MetricTable {
  std::size_t problems = 0;
  std::size_t rollouts_per_problem = 0;
  double accuracy = 0.0;         // majority vote
  double reward_accuracy = 0.0;  // argmax reward
  double precision = 0.0;
  double avg_gen_tokens = 0.0;
  std::vector<std::pair<int, double>> pass_at;

  // Throws InvalidInput for a budget that was not requested.
  double pass_at_n(int n) const;
};

// 1, 2, 4, ... up to and including n.
std::vector<int> default_pass_budgets(int n);

// Throws InvalidInput when rollout counts differ between problems.
MetricTable compute_metrics(std::span<const ProblemResult> results,
                            std::span<const int> budgets);

// |A n B| / |A u B|, and 1 when both are empty.
double jaccard_solved(const std::set<std::string>& a, const std::set<std::string>& b);

std::vector<std::vector<double>> jaccard_matrix(
    std::span<const std::set<std::string>> solved_sets);

}  // namespace des
