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

// Verifier-guided step-level search over (state, expert count) pairs.
//
// Every strategy shares one expansion engine: a pool of candidates is
// allocated the rollout budget, each live candidate is extended by sampled
// steps, the verifier scores the resulting pool and the top M survive.
// Strategies differ only in their roots, retention width and in how a
// child's expert count is chosen.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "des/evalkit.hpp"
#include "des/policy.hpp"
#include "des/problem.hpp"
#include "des/verifier.hpp"

namespace des {

enum class Strategy { best_of_n, beam, dvts, des };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

struct Lineage {
  int parent_index = -1;  // position of the parent in the previous pool
  int birth_timestep = 0;
  int birth_order = 0;    // unique within a pool; the universal tie-break
  int root = 0;           // index of the initial candidate it descends from
};

struct Candidate {
  State state;
  int k = 0;
  std::optional<Reward> reward;
  Lineage lineage;
};

struct SearchConfig {
  Strategy strategy = Strategy::des;
  int n = 32;          // rollouts per problem
  int m = 0;           // retained per step; 0 means n / 4
  int max_steps = 10;
  std::vector<int> k_set{4, 5, 6, 7, 8, 9, 10, 11};
  int fixed_k = 8;     // expert count of the fixed-k strategies
  double temperature = 0.8;
  bool inheritance_enabled = true;
  // Vary k across children. Defaults to on for des, off for the others.
  std::optional<bool> exploration_enabled;
  std::uint64_t global_seed = 0;
  // Defaults to DecodeParams::for_task with `temperature`.
  std::optional<DecodeParams> decode;

  int retained() const;
  bool exploring() const;
  DecodeParams decode_for(TaskKind kind) const;
  void validate() const;
};

struct TimestepTrace {
  int timestep = 0;
  int subtree = -1;
  int live_candidates = 0;
  int frozen_candidates = 0;
  int budget = 0;       // slots this step, frozen pass-throughs included
  int live_budget = 0;  // slots given to live candidates
  std::vector<int> allocation;  // per candidate of the incoming pool
  int generated = 0;
  double avg_k = 0.0;           // over generated steps
  std::vector<int> live_ks;     // distinct k among live incoming candidates
  std::vector<int> retained_ks; // k of each survivor, in rank order
};

struct SearchOutcome {
  std::vector<Rollout> rollouts;  // exactly n, in pool order
  std::size_t selected_by_reward = 0;
  std::optional<std::string> selected_by_vote;
  std::vector<double> per_timestep_avg_k;
  std::int64_t total_tokens = 0;      // sum of rollout tokens
  std::int64_t generated_tokens = 0;  // every sampled step, pruned ones included
  std::int64_t generated_steps = 0;
  std::int64_t generated_k_sum = 0;
  std::vector<std::int64_t> steps_by_t;  // generated steps per timestep
  std::vector<std::int64_t> k_sum_by_t;  // summed k of those steps
  std::vector<TimestepTrace> trace;
};

// One candidate per expert count, all at the bare prompt. Throws
// InvalidConfig on an empty or repeated k_set.
std::vector<Candidate> init_candidates(const Problem& problem, std::span<const int> k_set,
                                       int max_steps);

// floor(n / |C|) each; the remainder goes one by one in descending reward
// order, unscored candidates and ties ordered by birth order.
std::vector<int> allocate_rollouts(int n, std::span<const Candidate> candidates);

struct ExpansionContext {
  const Problem* problem = nullptr;
  const Policy* policy = nullptr;
  DecodeParams decode;
  std::uint64_t seed = 0;
  int timestep = 0;
  // Empty: children inherit the parent's k. Otherwise children cycle
  // through these counts regardless of the parent.
  std::vector<int> cycle_ks;
};

struct Expansion {
  std::vector<Candidate> pool;
  std::vector<int> counts;  // effective allocation, 1 for each frozen candidate
};

// Children are emitted round-robin across parents, so birth order
// interleaves parents. Terminated parents pass through once; the rest of
// their allocation is re-run over the live parents.
Expansion expand(std::span<const Candidate> candidates, std::span<const int> counts,
                 const ExpansionContext& context);

// Scores any unscored member of `pool` in place and returns the m best by
// (reward desc, birth order asc), in rank order.
std::vector<Candidate> select_top_m(const Problem& problem, std::vector<Candidate>& pool,
                                    int m, const Verifier& verifier);

SearchOutcome run_des(const Problem& problem, const SearchConfig& config,
                      const Policy& policy, const Verifier& verifier);
SearchOutcome run_best_of_n(const Problem& problem, const SearchConfig& config,
                            const Policy& policy, const Verifier& verifier);
SearchOutcome run_beam_search(const Problem& problem, const SearchConfig& config,
                              const Policy& policy, const Verifier& verifier);
SearchOutcome run_dvts(const Problem& problem, const SearchConfig& config,
                       const Policy& policy, const Verifier& verifier);

// Dispatches on config.strategy.
SearchOutcome run_search(const Problem& problem, const SearchConfig& config,
                         const Policy& policy, const Verifier& verifier);

}  // namespace des
