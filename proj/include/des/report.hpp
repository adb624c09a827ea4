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

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "des/evalkit.hpp"
#include "des/experiment.hpp"

namespace des {

struct CellReport {
  Cell cell;
  std::string key;
  std::size_t problems_ok = 0;
  std::size_t problems_failed = 0;
  std::size_t suite_size = 0;
  bool fatal = false;
  std::string error;
  MetricTable metrics;
  double avg_k = 0.0;  // over every generated step, pruned ones included
  std::vector<double> per_timestep_avg_k;
  double avg_all_gen_tokens = 0.0;  // per problem, pruned steps included
  int budget_violations = 0;
  int inheritance_violations = 0;
  std::set<std::string> solved;  // by majority vote
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one seed
};

struct GroupReport {
  std::string group_key;
  Cell cell;  // seed field meaningless
  std::size_t seeds = 0;
  Summary accuracy, precision, pass_at_n, gen_tokens, avg_k;
};

struct JaccardBlock {
  std::string label;  // strategy/n/seed the fixed-k cells share
  std::vector<int> ks;
  std::vector<std::vector<double>> matrix;
  double mean_off_diagonal = 0.0;
};

struct ExperimentReport {
  std::vector<CellReport> cells;  // sorted by key
  std::vector<GroupReport> groups;
  std::vector<JaccardBlock> jaccard;
};

// Pure function of the records; later records replace earlier ones for the
// same (cell, problem).
ExperimentReport build_report(std::span<const RawRecord> records);

Summary summarize(std::span<const double> values);

// cells.csv, summary.csv, timesteps.csv, jaccard.csv and report.txt.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);
std::string format_table(const ExperimentReport& report);

}  // namespace des
