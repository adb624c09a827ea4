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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace des {

enum class TaskKind { math, code, knowledge };

std::string_view to_string(TaskKind kind);
// Throws ValidationError for anything but "math", "code", "knowledge".
TaskKind parse_task_kind(std::string_view text);

// Latent solvability of a synthetic problem: a step is correct with
// probability p_good under an effective expert count and p_bad otherwise.
struct EffectiveKProfile {
  std::vector<int> effective_ks;  // sorted, distinct
  double p_good = 0.9;
  double p_bad = 0.1;
  int num_steps = 5;  // steps in a complete solution

  bool is_effective(int k) const;
  void validate() const;
  bool operator==(const EffectiveKProfile&) const = default;
};

struct Problem {
  std::string id;
  std::string prompt;
  std::string gold_answer;
  TaskKind task_kind = TaskKind::math;
  std::optional<EffectiveKProfile> profile;  // synthetic problems only

  bool operator==(const Problem&) const = default;
};

}  // namespace des
