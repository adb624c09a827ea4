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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "des/problem.hpp"

namespace des {

struct SuiteParams {
  int n_problems = 500;
  int k_min = 4;
  int k_max = 11;
  int effective_set_size = 2;
  double sensitivity = 1.0;  // probability that a problem is k-sensitive
  double p_good = 0.9;
  double p_bad = 0.1;
  int answer_space = 100;
  int min_steps = 3;
  int max_steps = 8;

  void validate() const;
};

// Synthetic k-sensitive math problems. Sensitive problems get effective sets
// chosen greedily so every k is effective for about the same number of
// problems and pairs of k share as few problems as possible. Insensitive
// problems treat every k in range as effective.
std::vector<Problem> generate_synthetic_suite(std::uint64_t seed, const SuiteParams& params);

std::string problem_to_json_line(const Problem& problem);

// Line-delimited JSON: {"id", "prompt", "answer", "task", optional "profile"}.
// Throws ParseError (with the 1-based line) on malformed lines and
// ValidationError on bad fields or duplicate ids.
std::vector<Problem> load_problems(const std::filesystem::path& path);
void write_problems(const std::filesystem::path& path, std::span<const Problem> problems);

}  // namespace des
