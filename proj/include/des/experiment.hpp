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

// Experiment grids: strategy x budget x k-set x fixed k x seed cells run over
// a problem suite, with raw per-problem results persisted as line-delimited
// JSON so a killed run resumes where it stopped.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "des/evalkit.hpp"
#include "des/policy.hpp"
#include "des/remote.hpp"
#include "des/search.hpp"
#include "des/suite.hpp"
#include "des/verifier.hpp"

namespace des {

enum class PolicyKind { synthetic, toy, remote };
enum class VerifierKind { oracle, noisy, constant, remote };

PolicyKind parse_policy_kind(std::string_view text);
VerifierKind parse_verifier_kind(std::string_view text);
std::string_view to_string(PolicyKind kind);
std::string_view to_string(VerifierKind kind);

struct PolicySpec {
  PolicyKind kind = PolicyKind::synthetic;
  std::filesystem::path weights;    // toy; empty means random weights
  std::uint64_t weights_seed = 0;   // toy random weights
  ScriptedOptions scripted;
  RemoteEndpoint endpoint;          // remote
};

struct VerifierSpec {
  VerifierKind kind = VerifierKind::oracle;
  double fidelity = 1.0;        // oracle and noisy
  double noise_sigma = 0.0;     // noisy
  double constant = 0.5;
  AggregationMode aggregation = AggregationMode::last;
  RemoteEndpoint endpoint;      // remote
};

std::unique_ptr<Policy> make_policy(const PolicySpec& spec);
// `seed` keys the oracle noise stream; the harness passes the cell seed.
std::unique_ptr<Verifier> make_verifier(const VerifierSpec& spec, std::uint64_t seed);

struct ExperimentConfig {
  std::filesystem::path problems;      // empty: generate the synthetic suite
  SuiteParams suite;
  std::uint64_t suite_seed = 0;
  std::vector<Strategy> strategies{Strategy::des};
  std::vector<int> n_values{32};
  int m = 0;                           // 0: n / 4 per cell
  int max_steps = 10;
  std::vector<std::vector<int>> k_sets{{4, 5, 6, 7, 8, 9, 10, 11}};
  std::vector<int> fixed_ks{8};
  double temperature = 0.8;
  std::vector<std::uint64_t> seeds{0};
  bool inheritance = true;
  std::optional<bool> exploration;     // per-strategy default when unset
  PolicySpec policy;
  VerifierSpec verifier;
  std::filesystem::path results;       // raw JSONL; empty keeps results in memory
  std::filesystem::path report_dir;    // empty: no report files
  int workers = 1;
  // Stop after this many new records, as if the process were killed.
  std::optional<std::size_t> stop_after;

  void validate() const;
  // Hash of everything that changes results but is not a grid axis.
  std::string fingerprint() const;
};

struct Cell {
  Strategy strategy = Strategy::des;
  int n = 32;
  int m = 0;
  std::vector<int> k_set;
  int fixed_k = 8;
  bool inheritance = true;
  bool exploration = true;
  std::uint64_t seed = 0;

  std::string group_key() const;  // every field but the seed
  std::string key() const;
  SearchConfig search_config(const ExperimentConfig& config) const;
};

// Strategies that explore expert counts expand over k_sets, the others over
// fixed_ks. Duplicate cells are dropped.
std::vector<Cell> expand_grid(const ExperimentConfig& config);

struct AuditCounts {
  int budget_violations = 0;
  int inheritance_violations = 0;
};

// Rollout count, per-step allocation sums and, for inheriting searches,
// constant expert counts along every trajectory.
AuditCounts audit_outcome(const SearchOutcome& outcome, const SearchConfig& config);

struct RawRecord {
  std::string fingerprint;
  std::string cell_key;
  Cell cell;
  std::string problem_id;
  std::size_t suite_size = 0;
  std::string status = "ok";  // ok, error, fatal
  std::string error;
  std::string gold_answer;
  TaskKind task_kind = TaskKind::math;
  std::vector<Rollout> rollouts;
  std::int64_t generated_tokens = 0;
  std::int64_t generated_steps = 0;
  std::int64_t generated_k_sum = 0;
  std::vector<std::int64_t> steps_by_t;
  std::vector<std::int64_t> k_sum_by_t;
  AuditCounts audit;

  std::string to_json_line() const;
  static RawRecord from_json_line(const std::string& line);
};

// Reads every well-formed record. A malformed final line (an interrupted
// write) is skipped; a malformed line elsewhere throws ParseError.
std::vector<RawRecord> read_records(const std::filesystem::path& path);

RawRecord run_problem(const Problem& problem, const Cell& cell, const ExperimentConfig& config,
                      const Policy& policy, const Verifier& verifier);

struct ExperimentReport;

struct RunSummary {
  std::vector<RawRecord> records;  // the full, deduplicated result set
  std::size_t computed = 0;
  std::size_t resumed = 0;
  std::size_t failed_problems = 0;
  std::vector<std::string> fatal_cells;
  bool interrupted = false;
};

RunSummary run_experiment(const ExperimentConfig& config);

}  // namespace des
