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

#include "des/search.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "des/errors.hpp"

namespace des {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::best_of_n: return "best_of_n";
    case Strategy::beam: return "beam";
    case Strategy::dvts: return "dvts";
    case Strategy::des: return "des";
  }
  return "des";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "best_of_n" || text == "bon") return Strategy::best_of_n;
  if (text == "beam" || text == "beam_search") return Strategy::beam;
  if (text == "dvts") return Strategy::dvts;
  if (text == "des") return Strategy::des;
  throw InvalidConfig("unknown strategy '" + std::string(text) + "'");
}

int SearchConfig::retained() const { return m > 0 ? m : std::max(1, n / 4); }

bool SearchConfig::exploring() const {
  return exploration_enabled.value_or(strategy == Strategy::des);
}

DecodeParams SearchConfig::decode_for(TaskKind kind) const {
  if (decode) return *decode;
  DecodeParams d = DecodeParams::for_task(kind);
  d.temperature = temperature;
  return d;
}

void SearchConfig::validate() const {
  if (n < 1) throw InvalidConfig("budget n must be >= 1");
  if (retained() > n) throw InvalidConfig("retention m must lie in [1, n]");
  if (max_steps < 1) throw InvalidConfig("max_steps must be >= 1");
  if (fixed_k < 1) throw InvalidConfig("fixed_k must be >= 1");
  if (!(temperature >= 0.0)) throw InvalidConfig("temperature must be >= 0");
  if (exploring() || strategy == Strategy::des) {
    if (k_set.empty()) throw InvalidConfig("k_set is empty");
    std::set<int> seen;
    for (int k : k_set) {
      if (k < 1) throw InvalidConfig("k_set entries must be positive");
      if (!seen.insert(k).second) {
        throw InvalidConfig("k_set repeats expert count " + std::to_string(k));
      }
    }
    if (strategy == Strategy::des && exploring() && inheritance_enabled &&
        static_cast<int>(k_set.size()) > n) {
      throw InvalidConfig("budget n is smaller than |k_set|");
    }
  }
}

std::vector<Candidate> init_candidates(const Problem& problem, std::span<const int> k_set,
                                       int max_steps) {
  if (k_set.empty()) throw InvalidConfig("k_set is empty");
  std::set<int> seen;
  std::vector<Candidate> out;
  out.reserve(k_set.size());
  for (int k : k_set) {
    if (!seen.insert(k).second) {
      throw InvalidConfig("k_set repeats expert count " + std::to_string(k));
    }
    Candidate c{State::initial(problem, k, max_steps), k, std::nullopt, {}};
    c.lineage.birth_order = static_cast<int>(out.size());
    c.lineage.root = static_cast<int>(out.size());
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

// (reward desc, birth order asc); unscored sorts below any score.
bool ranks_before(const Candidate& a, const Candidate& b) {
  const double ra = a.reward ? a.reward->value() : -1.0;
  const double rb = b.reward ? b.reward->value() : -1.0;
  if (ra != rb) return ra > rb;
  return a.lineage.birth_order < b.lineage.birth_order;
}

}  // namespace

std::vector<int> allocate_rollouts(int n, std::span<const Candidate> candidates) {
  if (candidates.empty()) throw InvalidConfig("no candidates to allocate to");
  const int size = static_cast<int>(candidates.size());
  if (n < size) {
    throw InvalidConfig("budget " + std::to_string(n) + " smaller than " +
                        std::to_string(size) + " candidates");
  }
  std::vector<int> counts(size, n / size);
  std::vector<int> order(size);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ranks_before(candidates[a], candidates[b]);
  });
  for (int r = 0; r < n % size; ++r) counts[order[r]] += 1;
  return counts;
}

Expansion expand(std::span<const Candidate> candidates, std::span<const int> counts,
                 const ExpansionContext& context) {
  if (counts.size() != candidates.size()) {
    throw InvalidInput("allocation does not match candidate count");
  }
  if (!context.problem || !context.policy) throw InvalidInput("expansion context incomplete");
  const Problem& problem = *context.problem;

  Expansion out;
  out.counts.assign(counts.begin(), counts.end());
  std::vector<Candidate> live;
  std::vector<int> live_index;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].state.terminated()) {
      live.push_back(candidates[i]);
      live_index.push_back(static_cast<int>(i));
    }
  }
  if (live.size() != candidates.size()) {
    const int total = std::accumulate(counts.begin(), counts.end(), 0);
    const int frozen = static_cast<int>(candidates.size() - live.size());
    std::fill(out.counts.begin(), out.counts.end(), 1);
    if (!live.empty()) {
      const std::vector<int> live_counts = allocate_rollouts(total - frozen, live);
      for (std::size_t j = 0; j < live.size(); ++j) out.counts[live_index[j]] = live_counts[j];
    }
  }

  // Parent-major index of each child, used to cycle expert counts.
  std::vector<int> first_child(candidates.size(), 0);
  for (std::size_t i = 0, acc = 0; i < candidates.size(); ++i) {
    first_child[i] = static_cast<int>(acc);
    if (!candidates[i].state.terminated()) acc += static_cast<std::size_t>(out.counts[i]);
  }

  const int rounds = out.counts.empty() ? 0 : *std::max_element(out.counts.begin(), out.counts.end());
  int birth = 0;
  for (int j = 0; j < rounds; ++j) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (j >= out.counts[i]) continue;
      const Candidate& parent = candidates[i];
      if (parent.state.terminated()) {
        Candidate frozen = parent;
        frozen.lineage.parent_index = static_cast<int>(i);
        frozen.lineage.birth_order = birth++;
        out.pool.push_back(std::move(frozen));
        continue;
      }
      const int k = context.cycle_ks.empty()
                        ? parent.k
                        : context.cycle_ks[static_cast<std::size_t>(first_child[i] + j) %
                                           context.cycle_ks.size()];
      Rng rng(derive_seed(context.seed, problem.id, static_cast<std::uint64_t>(context.timestep),
                          i, static_cast<std::uint64_t>(j)));
      Step step;
      try {
        step = context.policy->sample_step(problem, parent.state, k, context.decode, rng);
      } catch (const BackendError& e) {
        throw BackendError("problem " + problem.id + ", t=" + std::to_string(context.timestep) +
                               ", candidate " + std::to_string(i) + ": " + e.what(),
                           e.status(), e.retries());
      }
      Candidate child{parent.state.extend(std::move(step), k), k, std::nullopt,
                      Lineage{static_cast<int>(i), context.timestep, birth++, parent.lineage.root}};
      out.pool.push_back(std::move(child));
    }
  }
  return out;
}

std::vector<Candidate> select_top_m(const Problem& problem, std::vector<Candidate>& pool,
                                    int m, const Verifier& verifier) {
  if (pool.empty()) throw InvalidInput("cannot select from an empty pool");
  if (m < 1) throw InvalidConfig("m must be >= 1");
  for (Candidate& c : pool) {
    if (!c.reward) c.reward = verifier.score(problem, c.state);
  }
  std::vector<const Candidate*> order;
  order.reserve(pool.size());
  for (const Candidate& c : pool) order.push_back(&c);
  const std::size_t keep = std::min(pool.size(), static_cast<std::size_t>(m));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [](const Candidate* a, const Candidate* b) { return ranks_before(*a, *b); });
  std::vector<Candidate> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(*order[i]);
  return out;
}

namespace {

struct StepStats {
  std::int64_t generated_tokens = 0;
  std::int64_t generated_steps = 0;
  std::int64_t k_sum = 0;
  std::vector<std::int64_t> steps_by_t;
  std::vector<std::int64_t> k_sum_by_t;

  void add(int t, int k, int tokens) {
    if (steps_by_t.size() <= static_cast<std::size_t>(t)) {
      steps_by_t.resize(t + 1, 0);
      k_sum_by_t.resize(t + 1, 0);
    }
    steps_by_t[t] += 1;
    k_sum_by_t[t] += k;
    generated_steps += 1;
    generated_tokens += tokens;
    k_sum += k;
  }
};

std::vector<int> distinct_sorted(std::vector<int> ks) {
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

struct PoolSearch {
  std::vector<Candidate> roots;
  int budget = 0;
  int retain = 0;
  std::vector<int> cycle_ks;
  std::uint64_t seed = 0;
  int subtree = -1;
};

// Runs allocate / expand / select until every survivor is terminated or the
// step limit is hit, and returns the last expanded pool.
std::vector<Candidate> run_pool(const Problem& problem, const PoolSearch& spec,
                                const SearchConfig& config, const Policy& policy,
                                const Verifier& verifier, StepStats& stats,
                                std::vector<TimestepTrace>& trace) {
  ExpansionContext context;
  context.problem = &problem;
  context.policy = &policy;
  context.decode = config.decode_for(problem.task_kind);
  context.seed = spec.seed;
  context.cycle_ks = spec.cycle_ks;

  std::vector<Candidate> current = spec.roots;
  std::vector<Candidate> last_pool;
  for (int t = 0; t < config.max_steps; ++t) {
    TimestepTrace step_trace;
    step_trace.timestep = t;
    step_trace.subtree = spec.subtree;
    std::vector<int> live_ks;
    for (const Candidate& c : current) {
      if (c.state.terminated()) {
        ++step_trace.frozen_candidates;
      } else {
        ++step_trace.live_candidates;
        live_ks.push_back(c.k);
      }
    }
    if (step_trace.live_candidates == 0) break;
    step_trace.live_ks = distinct_sorted(std::move(live_ks));

    context.timestep = t;
    const std::vector<int> counts = allocate_rollouts(spec.budget, current);
    Expansion expansion = expand(current, counts, context);

    std::int64_t k_sum = 0;
    for (std::size_t i = 0; i < expansion.pool.size(); ++i) {
      const Candidate& c = expansion.pool[i];
      if (c.lineage.birth_timestep == t && !c.state.steps().empty() &&
          !current[c.lineage.parent_index].state.terminated()) {
        const Step& s = c.state.steps().back();
        stats.add(t, c.k, s.token_count);
        k_sum += c.k;
        ++step_trace.generated;
      }
    }
    step_trace.allocation = expansion.counts;
    step_trace.budget = std::accumulate(expansion.counts.begin(), expansion.counts.end(), 0);
    step_trace.live_budget = step_trace.budget - step_trace.frozen_candidates;
    step_trace.avg_k = step_trace.generated > 0
                           ? static_cast<double>(k_sum) / step_trace.generated
                           : 0.0;

    std::vector<Candidate> survivors = select_top_m(problem, expansion.pool, spec.retain, verifier);
    for (const Candidate& c : survivors) step_trace.retained_ks.push_back(c.k);
    trace.push_back(std::move(step_trace));

    last_pool = std::move(expansion.pool);
    current = std::move(survivors);
    if (std::all_of(current.begin(), current.end(),
                    [](const Candidate& c) { return c.state.terminated(); })) {
      break;
    }
  }
  return last_pool;
}

Rollout to_rollout(const Problem& problem, const Candidate& c, int subtree) {
  Rollout r;
  r.problem_id = problem.id;
  r.final_text = c.state.response_text();
  r.extracted_answer = extract_answer(r.final_text, problem.task_kind);
  r.reward = c.reward.value_or(Reward{});
  r.k = c.k;
  r.tokens = c.state.total_tokens();
  r.steps_taken = static_cast<int>(c.state.steps().size());
  for (const Step& s : c.state.steps()) r.step_ks.push_back(s.expert_count);
  r.finished = !c.state.steps().empty() && c.state.steps().back().is_terminal;
  r.subtree = subtree;
  return r;
}

SearchOutcome finish(const Problem& problem, std::vector<Rollout> rollouts, StepStats stats,
                     std::vector<TimestepTrace> trace) {
  SearchOutcome out;
  out.rollouts = std::move(rollouts);
  out.trace = std::move(trace);
  for (const Rollout& r : out.rollouts) out.total_tokens += r.tokens;
  out.selected_by_reward = select_by_reward(out.rollouts);
  out.selected_by_vote = majority_vote(out.rollouts, problem.task_kind);
  out.generated_tokens = stats.generated_tokens;
  out.generated_steps = stats.generated_steps;
  out.generated_k_sum = stats.k_sum;
  out.steps_by_t = stats.steps_by_t;
  out.k_sum_by_t = stats.k_sum_by_t;
  for (std::size_t t = 0; t < stats.steps_by_t.size(); ++t) {
    out.per_timestep_avg_k.push_back(
        stats.steps_by_t[t] > 0
            ? static_cast<double>(stats.k_sum_by_t[t]) / static_cast<double>(stats.steps_by_t[t])
            : 0.0);
  }
  return out;
}

SearchOutcome run_pooled(const Problem& problem, const SearchConfig& config,
                         const Policy& policy, const Verifier& verifier, PoolSearch spec) {
  StepStats stats;
  std::vector<TimestepTrace> trace;
  std::vector<Candidate> pool = run_pool(problem, spec, config, policy, verifier, stats, trace);
  std::vector<Rollout> rollouts;
  rollouts.reserve(pool.size());
  for (const Candidate& c : pool) rollouts.push_back(to_rollout(problem, c, spec.subtree));
  return finish(problem, std::move(rollouts), std::move(stats), std::move(trace));
}

PoolSearch single_root(const Problem& problem, const SearchConfig& config, int k) {
  PoolSearch spec;
  Candidate root{State::initial(problem, k, config.max_steps), k, std::nullopt, {}};
  spec.roots.push_back(std::move(root));
  spec.budget = config.n;
  spec.retain = config.retained();
  spec.seed = config.global_seed;
  if (config.exploring()) spec.cycle_ks = config.k_set;
  return spec;
}

}  // namespace

SearchOutcome run_des(const Problem& problem, const SearchConfig& config,
                      const Policy& policy, const Verifier& verifier) {
  config.validate();
  if (!config.exploring()) {
    return run_pooled(problem, config, policy, verifier,
                      single_root(problem, config, config.fixed_k));
  }
  if (!config.inheritance_enabled) {
    // Uniform exploration at every step: identical to beam search that
    // cycles expert counts.
    return run_pooled(problem, config, policy, verifier,
                      single_root(problem, config, config.k_set.front()));
  }
  PoolSearch spec;
  spec.roots = init_candidates(problem, config.k_set, config.max_steps);
  spec.budget = config.n;
  spec.retain = config.retained();
  spec.seed = config.global_seed;
  return run_pooled(problem, config, policy, verifier, std::move(spec));
}

SearchOutcome run_beam_search(const Problem& problem, const SearchConfig& config,
                              const Policy& policy, const Verifier& verifier) {
  config.validate();
  const int root_k = config.exploring() ? config.k_set.front() : config.fixed_k;
  return run_pooled(problem, config, policy, verifier, single_root(problem, config, root_k));
}

SearchOutcome run_dvts(const Problem& problem, const SearchConfig& config,
                       const Policy& policy, const Verifier& verifier) {
  config.validate();
  const int subtrees = config.retained();
  const int root_k = config.exploring() ? config.k_set.front() : config.fixed_k;
  StepStats stats;
  std::vector<TimestepTrace> trace;
  std::vector<Rollout> rollouts;
  rollouts.reserve(config.n);
  for (int s = 0; s < subtrees; ++s) {
    PoolSearch spec = single_root(problem, config, root_k);
    spec.roots.front().lineage.root = s;
    spec.budget = config.n / subtrees + (s < config.n % subtrees ? 1 : 0);
    spec.retain = 1;
    spec.seed = derive_seed(config.global_seed, {0xd715ULL, static_cast<std::uint64_t>(s)});
    spec.subtree = s;
    std::vector<Candidate> pool = run_pool(problem, spec, config, policy, verifier, stats, trace);
    for (const Candidate& c : pool) rollouts.push_back(to_rollout(problem, c, s));
  }
  return finish(problem, std::move(rollouts), std::move(stats), std::move(trace));
}

SearchOutcome run_best_of_n(const Problem& problem, const SearchConfig& config,
                            const Policy& policy, const Verifier& verifier) {
  config.validate();
  const DecodeParams decode = config.decode_for(problem.task_kind);
  std::vector<int> chain_k(config.n);
  for (int i = 0; i < config.n; ++i) {
    chain_k[i] = config.exploring() ? config.k_set[static_cast<std::size_t>(i) % config.k_set.size()]
                                    : config.fixed_k;
  }

  StepStats stats;
  std::vector<TimestepTrace> trace;
  std::vector<State> chains;
  chains.reserve(config.n);
  for (int i = 0; i < config.n; ++i) {
    chains.push_back(State::initial(problem, chain_k[i], config.max_steps));
  }
  for (int t = 0; t < config.max_steps; ++t) {
    TimestepTrace step_trace;
    step_trace.timestep = t;
    std::vector<int> live_ks;
    for (int i = 0; i < config.n; ++i) {
      if (chains[i].terminated()) {
        ++step_trace.frozen_candidates;
      } else {
        ++step_trace.live_candidates;
        live_ks.push_back(chain_k[i]);
      }
    }
    if (step_trace.live_candidates == 0) break;
    step_trace.live_ks = distinct_sorted(std::move(live_ks));
    std::int64_t k_sum = 0;
    for (int i = 0; i < config.n; ++i) {
      step_trace.allocation.push_back(1);
      if (chains[i].terminated()) continue;
      Rng rng(derive_seed(config.global_seed, problem.id, static_cast<std::uint64_t>(t),
                          static_cast<std::uint64_t>(i), 0));
      Step step = policy.sample_step(problem, chains[i], chain_k[i], decode, rng);
      stats.add(t, chain_k[i], step.token_count);
      k_sum += chain_k[i];
      ++step_trace.generated;
      chains[i] = chains[i].extend(std::move(step), chain_k[i]);
    }
    step_trace.budget = config.n;
    step_trace.live_budget = config.n - step_trace.frozen_candidates;
    step_trace.avg_k = static_cast<double>(k_sum) / step_trace.generated;
    trace.push_back(std::move(step_trace));
  }

  std::vector<Rollout> rollouts;
  rollouts.reserve(config.n);
  for (int i = 0; i < config.n; ++i) {
    Candidate c{chains[i], chain_k[i], verifier.score(problem, chains[i]), {}};
    c.lineage.root = i;
    rollouts.push_back(to_rollout(problem, c, -1));
  }
  return finish(problem, std::move(rollouts), std::move(stats), std::move(trace));
}

SearchOutcome run_search(const Problem& problem, const SearchConfig& config,
                         const Policy& policy, const Verifier& verifier) {
  switch (config.strategy) {
    case Strategy::best_of_n: return run_best_of_n(problem, config, policy, verifier);
    case Strategy::beam: return run_beam_search(problem, config, policy, verifier);
    case Strategy::dvts: return run_dvts(problem, config, policy, verifier);
    case Strategy::des: return run_des(problem, config, policy, verifier);
  }
  throw InvalidConfig("unknown strategy");
}

}  // namespace des
