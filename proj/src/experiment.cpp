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

#include "des/experiment.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <json.hpp>

#include "des/errors.hpp"
#include "des/moe.hpp"
#include "des/report.hpp"
#include "des/seed.hpp"

namespace des {

using nlohmann::json;

PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "synthetic") return PolicyKind::synthetic;
  if (text == "toy") return PolicyKind::toy;
  if (text == "remote") return PolicyKind::remote;
  throw InvalidConfig("unknown policy '" + std::string(text) + "'");
}

VerifierKind parse_verifier_kind(std::string_view text) {
  if (text == "oracle") return VerifierKind::oracle;
  if (text == "noisy") return VerifierKind::noisy;
  if (text == "constant") return VerifierKind::constant;
  if (text == "remote") return VerifierKind::remote;
  throw InvalidConfig("unknown verifier '" + std::string(text) + "'");
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::synthetic: return "synthetic";
    case PolicyKind::toy: return "toy";
    case PolicyKind::remote: return "remote";
  }
  return "synthetic";
}

std::string_view to_string(VerifierKind kind) {
  switch (kind) {
    case VerifierKind::oracle: return "oracle";
    case VerifierKind::noisy: return "noisy";
    case VerifierKind::constant: return "constant";
    case VerifierKind::remote: return "remote";
  }
  return "oracle";
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec) {
  switch (spec.kind) {
    case PolicyKind::synthetic:
      return std::make_unique<ScriptedPolicy>(spec.scripted);
    case PolicyKind::toy: {
      auto weights = std::make_shared<const moe::ModelWeights>(
          spec.weights.empty() ? moe::ModelWeights::random(moe::MoEConfig{}, spec.weights_seed)
                               : moe::ModelWeights::load(spec.weights));
      return std::make_unique<ToyMoePolicy>(std::move(weights));
    }
    case PolicyKind::remote:
      return std::make_unique<RemotePolicy>(spec.endpoint);
  }
  throw InvalidConfig("unknown policy kind");
}

std::unique_ptr<Verifier> make_verifier(const VerifierSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case VerifierKind::oracle:
      return std::make_unique<OracleVerifier>(OracleVerifierConfig{spec.fidelity, 0.0, seed});
    case VerifierKind::noisy:
      return std::make_unique<OracleVerifier>(
          OracleVerifierConfig{spec.fidelity, spec.noise_sigma, seed});
    case VerifierKind::constant:
      return std::make_unique<ConstantVerifier>(spec.constant);
    case VerifierKind::remote:
      return std::make_unique<RemotePrmVerifier>(spec.endpoint, spec.aggregation);
  }
  throw InvalidConfig("unknown verifier kind");
}

namespace {

bool default_exploration(const ExperimentConfig& config, Strategy strategy) {
  return config.exploration.value_or(strategy == Strategy::des);
}

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a64(buf.str()));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (problems.empty()) suite.validate();
  if (strategies.empty() || n_values.empty() || k_sets.empty() || fixed_ks.empty() ||
      seeds.empty()) {
    throw InvalidConfig("strategies, n values, k sets, fixed ks and seeds must be nonempty");
  }
  if (workers < 1) throw InvalidConfig("workers must be >= 1");
  if (verifier.kind == VerifierKind::noisy && !(verifier.noise_sigma >= 0.0)) {
    throw InvalidConfig("noise sigma must be >= 0");
  }
  if (!(verifier.fidelity >= 0.0 && verifier.fidelity <= 1.0)) {
    throw InvalidConfig("verifier fidelity must lie in [0, 1]");
  }
  for (const Cell& cell : expand_grid(*this)) cell.search_config(*this).validate();
}

std::string ExperimentConfig::fingerprint() const {
  json j;
  if (problems.empty()) {
    j["suite"] = {{"seed", suite_seed},
                  {"n", suite.n_problems},
                  {"k", {suite.k_min, suite.k_max}},
                  {"set", suite.effective_set_size},
                  {"sensitivity", suite.sensitivity},
                  {"p", {suite.p_good, suite.p_bad}},
                  {"answers", suite.answer_space},
                  {"steps", {suite.min_steps, suite.max_steps}}};
  } else {
    j["problems"] = file_digest(problems);
  }
  j["max_steps"] = max_steps;
  j["temperature"] = temperature;
  j["policy"] = {{"kind", std::string(to_string(policy.kind))},
                 {"step_tokens", policy.scripted.nominal_step_tokens},
                 {"answers", policy.scripted.answer_space}};
  if (policy.kind == PolicyKind::toy) {
    j["policy"]["weights"] =
        policy.weights.empty() ? "random:" + std::to_string(policy.weights_seed)
                               : file_digest(policy.weights);
  }
  if (policy.kind == PolicyKind::remote) {
    j["policy"]["url"] = policy.endpoint.url;
    j["policy"]["model"] = policy.endpoint.model;
  }
  j["verifier"] = {{"kind", std::string(to_string(verifier.kind))},
                   {"fidelity", verifier.fidelity},
                   {"sigma", verifier.noise_sigma},
                   {"constant", verifier.constant},
                   {"aggregation", std::string(to_string(verifier.aggregation))}};
  if (verifier.kind == VerifierKind::remote) j["verifier"]["url"] = verifier.endpoint.url;
  return hex64(fnv1a64(j.dump()));
}

std::string Cell::group_key() const {
  std::string out = std::string(to_string(strategy));
  out += "|n=" + std::to_string(n) + "|m=" + std::to_string(m);
  out += exploration ? "|ks=" + join_ints(k_set) : "|k=" + std::to_string(fixed_k);
  if (strategy == Strategy::des && exploration) out += inheritance ? "|inherit" : "|no-inherit";
  return out;
}

std::string Cell::key() const { return group_key() + "|seed=" + std::to_string(seed); }

SearchConfig Cell::search_config(const ExperimentConfig& config) const {
  SearchConfig s;
  s.strategy = strategy;
  s.n = n;
  s.m = m;
  s.max_steps = config.max_steps;
  s.k_set = k_set;
  s.fixed_k = fixed_k;
  s.temperature = config.temperature;
  s.inheritance_enabled = inheritance;
  s.exploration_enabled = exploration;
  s.global_seed = seed;
  return s;
}

std::vector<Cell> expand_grid(const ExperimentConfig& config) {
  std::vector<Cell> out;
  std::set<std::string> seen;
  for (Strategy strategy : config.strategies) {
    const bool exploring = default_exploration(config, strategy);
    for (int n : config.n_values) {
      const int m = config.m > 0 ? config.m : std::max(1, n / 4);
      const std::size_t variants = exploring ? config.k_sets.size() : config.fixed_ks.size();
      for (std::size_t v = 0; v < variants; ++v) {
        for (std::uint64_t seed : config.seeds) {
          Cell cell;
          cell.strategy = strategy;
          cell.n = n;
          cell.m = m;
          cell.exploration = exploring;
          cell.inheritance = strategy == Strategy::des ? config.inheritance : true;
          if (exploring) {
            cell.k_set = config.k_sets[v];
            cell.fixed_k = config.k_sets[v].empty() ? 0 : config.k_sets[v].front();
          } else {
            cell.k_set = {config.fixed_ks[v]};
            cell.fixed_k = config.fixed_ks[v];
          }
          cell.seed = seed;
          if (seen.insert(cell.key()).second) out.push_back(std::move(cell));
        }
      }
    }
  }
  return out;
}

AuditCounts audit_outcome(const SearchOutcome& outcome, const SearchConfig& config) {
  AuditCounts audit;
  if (static_cast<int>(outcome.rollouts.size()) != config.n) ++audit.budget_violations;
  std::map<int, int> subtree_budget;
  for (const TimestepTrace& t : outcome.trace) {
    int total = 0, live = 0;
    for (int c : t.allocation) total += c;
    live = total - t.frozen_candidates;
    if (total != t.budget || live != t.live_budget) ++audit.budget_violations;
    if (t.generated != t.live_budget) ++audit.budget_violations;
    auto [it, inserted] = subtree_budget.emplace(t.subtree, t.budget);
    if (!inserted && it->second != t.budget) ++audit.budget_violations;
  }
  if (config.strategy != Strategy::dvts) {
    for (const auto& [subtree, budget] : subtree_budget) {
      if (budget != config.n) ++audit.budget_violations;
    }
  } else {
    int sum = 0;
    for (const auto& [subtree, budget] : subtree_budget) sum += budget;
    if (!subtree_budget.empty() &&
        static_cast<int>(subtree_budget.size()) == config.retained() && sum != config.n) {
      ++audit.budget_violations;
    }
  }
  const bool cycles = config.exploring() && config.strategy != Strategy::best_of_n &&
                      (config.strategy != Strategy::des || !config.inheritance_enabled);
  if (!cycles) {
    for (const Rollout& r : outcome.rollouts) {
      for (int k : r.step_ks) {
        if (k != r.k) {
          ++audit.inheritance_violations;
          break;
        }
      }
    }
  }
  return audit;
}

std::string RawRecord::to_json_line() const {
  json rs = json::array();
  for (const Rollout& r : rollouts) {
    rs.push_back({{"text", r.final_text},
                  {"answer", r.extracted_answer ? json(*r.extracted_answer) : json(nullptr)},
                  {"reward", r.reward.value()},
                  {"k", r.k},
                  {"tokens", r.tokens},
                  {"steps", r.steps_taken},
                  {"step_ks", r.step_ks},
                  {"finished", r.finished},
                  {"subtree", r.subtree}});
  }
  json j = {{"fingerprint", fingerprint},
            {"cell", cell_key},
            {"strategy", std::string(to_string(cell.strategy))},
            {"n", cell.n},
            {"m", cell.m},
            {"k_set", cell.k_set},
            {"fixed_k", cell.fixed_k},
            {"inheritance", cell.inheritance},
            {"exploration", cell.exploration},
            {"seed", cell.seed},
            {"problem_id", problem_id},
            {"suite_size", suite_size},
            {"status", status},
            {"error", error},
            {"gold", gold_answer},
            {"task", std::string(to_string(task_kind))},
            {"rollouts", std::move(rs)},
            {"generated_tokens", generated_tokens},
            {"generated_steps", generated_steps},
            {"generated_k_sum", generated_k_sum},
            {"steps_by_t", steps_by_t},
            {"k_sum_by_t", k_sum_by_t},
            {"budget_violations", audit.budget_violations},
            {"inheritance_violations", audit.inheritance_violations}};
  return j.dump();
}

RawRecord RawRecord::from_json_line(const std::string& line) {
  const json j = json::parse(line);
  RawRecord r;
  r.fingerprint = j.at("fingerprint").get<std::string>();
  r.cell_key = j.at("cell").get<std::string>();
  r.cell.strategy = parse_strategy(j.at("strategy").get<std::string>());
  r.cell.n = j.at("n").get<int>();
  r.cell.m = j.at("m").get<int>();
  r.cell.k_set = j.at("k_set").get<std::vector<int>>();
  r.cell.fixed_k = j.at("fixed_k").get<int>();
  r.cell.inheritance = j.at("inheritance").get<bool>();
  r.cell.exploration = j.at("exploration").get<bool>();
  r.cell.seed = j.at("seed").get<std::uint64_t>();
  r.problem_id = j.at("problem_id").get<std::string>();
  r.suite_size = j.at("suite_size").get<std::size_t>();
  r.status = j.at("status").get<std::string>();
  r.error = j.at("error").get<std::string>();
  r.gold_answer = j.at("gold").get<std::string>();
  r.task_kind = parse_task_kind(j.at("task").get<std::string>());
  for (const json& rj : j.at("rollouts")) {
    Rollout ro;
    ro.problem_id = r.problem_id;
    ro.final_text = rj.at("text").get<std::string>();
    if (!rj.at("answer").is_null()) ro.extracted_answer = rj.at("answer").get<std::string>();
    ro.reward = Reward(rj.at("reward").get<double>());
    ro.k = rj.at("k").get<int>();
    ro.tokens = rj.at("tokens").get<std::int64_t>();
    ro.steps_taken = rj.at("steps").get<int>();
    ro.step_ks = rj.at("step_ks").get<std::vector<int>>();
    ro.finished = rj.at("finished").get<bool>();
    ro.subtree = rj.at("subtree").get<int>();
    r.rollouts.push_back(std::move(ro));
  }
  r.generated_tokens = j.at("generated_tokens").get<std::int64_t>();
  r.generated_steps = j.at("generated_steps").get<std::int64_t>();
  r.generated_k_sum = j.at("generated_k_sum").get<std::int64_t>();
  r.steps_by_t = j.at("steps_by_t").get<std::vector<std::int64_t>>();
  r.k_sum_by_t = j.at("k_sum_by_t").get<std::vector<std::int64_t>>();
  r.audit.budget_violations = j.at("budget_violations").get<int>();
  r.audit.inheritance_violations = j.at("inheritance_violations").get<int>();
  return r;
}

namespace {

// Parses the file and returns the byte length of its well-formed prefix.
std::uintmax_t read_valid_records(const std::filesystem::path& path,
                                  std::vector<RawRecord>& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open results file " + path.string());
  std::string text;
  std::size_t line = 0;
  std::uintmax_t valid = 0, offset = 0;
  std::optional<std::pair<std::size_t, std::string>> pending_error;
  while (std::getline(in, text)) {
    ++line;
    const bool complete = !in.eof();
    offset += text.size() + (complete ? 1 : 0);
    if (text.find_first_not_of(" \t\r") == std::string::npos) {
      if (!pending_error) valid = offset;
      continue;
    }
    if (pending_error) throw ParseError(pending_error->first, pending_error->second);
    try {
      if (!complete) throw std::runtime_error("unterminated record");
      out.push_back(RawRecord::from_json_line(text));
      valid = offset;
    } catch (const std::exception& e) {
      pending_error = {line, e.what()};
    }
  }
  if (pending_error) {
    spdlog::warn("ignoring malformed final record at line {} of {}", pending_error->first,
                 path.string());
  }
  return valid;
}

std::string record_id(const std::string& cell_key, const std::string& problem_id) {
  return cell_key + '\n' + problem_id;
}

}  // namespace

std::vector<RawRecord> read_records(const std::filesystem::path& path) {
  std::vector<RawRecord> out;
  read_valid_records(path, out);
  return out;
}

RawRecord run_problem(const Problem& problem, const Cell& cell, const ExperimentConfig& config,
                      const Policy& policy, const Verifier& verifier) {
  const SearchConfig search = cell.search_config(config);
  RawRecord r;
  r.cell_key = cell.key();
  r.cell = cell;
  r.problem_id = problem.id;
  r.gold_answer = problem.gold_answer;
  r.task_kind = problem.task_kind;
  try {
    SearchOutcome outcome = run_search(problem, search, policy, verifier);
    r.audit = audit_outcome(outcome, search);
    r.rollouts = std::move(outcome.rollouts);
    r.generated_tokens = outcome.generated_tokens;
    r.generated_steps = outcome.generated_steps;
    r.generated_k_sum = outcome.generated_k_sum;
    r.steps_by_t = std::move(outcome.steps_by_t);
    r.k_sum_by_t = std::move(outcome.k_sum_by_t);
  } catch (const BackendError&) {
    throw;
  } catch (const std::exception& e) {
    r.status = "error";
    r.error = e.what();
    r.rollouts.clear();
  }
  return r;
}

RunSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::vector<Problem> problems = config.problems.empty()
                                            ? generate_synthetic_suite(config.suite_seed, config.suite)
                                            : load_problems(config.problems);
  const std::string fingerprint = config.fingerprint();
  const std::vector<Cell> cells = expand_grid(config);
  const std::unique_ptr<Policy> policy = make_policy(config.policy);

  RunSummary summary;
  std::vector<RawRecord> records;
  std::set<std::string> done;
  if (!config.results.empty() && std::filesystem::exists(config.results)) {
    const std::uintmax_t valid = read_valid_records(config.results, records);
    if (valid < std::filesystem::file_size(config.results)) {
      std::filesystem::resize_file(config.results, valid);
    }
    for (const RawRecord& r : records) {
      if (r.fingerprint != fingerprint) {
        throw InvalidConfig("results file " + config.results.string() +
                            " was produced by a different configuration");
      }
    }
    // Failed problems are retried; fatal cell markers are superseded.
    std::erase_if(records, [](const RawRecord& r) { return r.status != "ok"; });
    for (const RawRecord& r : records) done.insert(record_id(r.cell_key, r.problem_id));
    summary.resumed = records.size();
    if (!records.empty()) spdlog::info("resuming: {} results already on disk", records.size());
  }

  std::ofstream out;
  if (!config.results.empty()) {
    if (config.results.has_parent_path()) {
      std::filesystem::create_directories(config.results.parent_path());
    }
    out.open(config.results, std::ios::binary | std::ios::app);
    if (!out) throw InvalidInput("cannot write results file " + config.results.string());
  }

  std::mutex write_mutex;
  std::size_t written = 0;
  std::atomic<bool> stop{false};
  auto emit = [&](RawRecord record) {
    std::lock_guard lock(write_mutex);
    if (stop.load()) return;
    record.fingerprint = fingerprint;
    record.suite_size = problems.size();
    if (out.is_open()) {
      out << record.to_json_line() << '\n';
      out.flush();
    }
    if (record.status == "error") {
      ++summary.failed_problems;
      spdlog::warn("{} / {}: {}", record.cell_key, record.problem_id, record.error);
    }
    if (record.status != "fatal") ++summary.computed;
    records.push_back(std::move(record));
    ++written;
    if (config.stop_after && written >= *config.stop_after) {
      stop = true;
      summary.interrupted = true;
    }
  };

  for (const Cell& cell : cells) {
    if (stop.load()) break;
    const std::string key = cell.key();
    std::vector<const Problem*> pending;
    for (const Problem& p : problems) {
      if (!done.contains(record_id(key, p.id))) pending.push_back(&p);
    }
    if (pending.empty()) continue;
    spdlog::info("cell {}: {} problems", key, pending.size());

    std::unique_ptr<Verifier> verifier;
    std::string fatal;
    try {
      verifier = make_verifier(config.verifier, cell.seed);
    } catch (const std::exception& e) {
      fatal = e.what();
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> cell_failed{!fatal.empty()};
    std::mutex fatal_mutex;
    auto worker = [&] {
      while (!stop.load() && !cell_failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= pending.size()) return;
        try {
          emit(run_problem(*pending[i], cell, config, *policy, *verifier));
        } catch (const std::exception& e) {
          std::lock_guard lock(fatal_mutex);
          if (!cell_failed.exchange(true)) fatal = e.what();
        }
      }
    };
    const int threads = std::min<int>(config.workers, static_cast<int>(pending.size()));
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    if (cell_failed.load()) {
      spdlog::error("cell {} aborted: {}", key, fatal);
      summary.fatal_cells.push_back(key);
      RawRecord marker;
      marker.cell_key = key;
      marker.cell = cell;
      marker.status = "fatal";
      marker.error = fatal;
      emit(std::move(marker));
    }
  }

  std::stable_sort(records.begin(), records.end(), [](const RawRecord& a, const RawRecord& b) {
    return std::tie(a.cell_key, a.problem_id) < std::tie(b.cell_key, b.problem_id);
  });
  summary.records = std::move(records);
  if (!config.report_dir.empty() && !summary.interrupted) {
    write_report(build_report(summary.records), config.report_dir);
  }
  return summary;
}

}  // namespace des
