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

// Acceptance suite: one line per criterion, exit status 0 only if all pass.
//
//   des_acceptance [path/to/des]   (the CLI is used for the kill-and-resume check)

#include <fcntl.h>
#include <signal.h>
#include <spdlog/spdlog.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "des/experiment.hpp"
#include "des/moe.hpp"
#include "des/report.hpp"
#include "des/search.hpp"
#include "des/suite.hpp"
#include "oracles.hpp"

using namespace des;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::string cli_path;
fs::path work_dir;

// Audit totals over every grid this binary runs.
struct GridAudit {
  std::size_t cells = 0;
  std::size_t records = 0;
  std::size_t wrong_rollout_counts = 0;
  long budget_violations = 0;
  long inheritance_violations = 0;
} audit;

SuiteParams figure1_suite() {
  SuiteParams s;
  s.n_problems = 500;
  s.k_min = 4;
  s.k_max = 11;
  s.effective_set_size = 2;
  s.sensitivity = 1.0;
  s.p_good = 0.9;
  s.p_bad = 0.1;
  return s;
}

ExperimentConfig base_config() {
  ExperimentConfig c;
  c.suite = figure1_suite();
  c.max_steps = 10;
  c.temperature = 0.8;
  c.verifier.kind = VerifierKind::oracle;
  c.verifier.fidelity = 0.9;
  return c;
}

std::vector<std::uint64_t> seeds(int n) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), 0);
  return s;
}

ExperimentReport run_grid(const ExperimentConfig& config) {
  const RunSummary summary = run_experiment(config);
  std::set<std::string> cells;
  for (const RawRecord& r : summary.records) {
    cells.insert(r.cell_key);
    ++audit.records;
    if (r.status == "ok" && static_cast<int>(r.rollouts.size()) != r.cell.n) {
      ++audit.wrong_rollout_counts;
    }
    audit.budget_violations += r.audit.budget_violations;
    audit.inheritance_violations += r.audit.inheritance_violations;
  }
  audit.cells += cells.size();
  return build_report(summary.records);
}

std::map<std::uint64_t, const CellReport*> by_seed(const ExperimentReport& r,
                                                   const std::function<bool(const Cell&)>& pick) {
  std::map<std::uint64_t, const CellReport*> out;
  for (const CellReport& c : r.cells) {
    if (pick(c.cell)) out[c.cell.seed] = &c;
  }
  return out;
}

struct Paired {
  double mean_a = 0, mean_b = 0, mean_diff = 0, stderr_diff = 0;
  std::size_t n = 0;
};

Paired paired(const std::map<std::uint64_t, const CellReport*>& a,
              const std::map<std::uint64_t, const CellReport*>& b,
              const std::function<double(const CellReport&)>& metric) {
  Paired p;
  std::vector<double> d;
  for (const auto& [seed, ca] : a) {
    const auto it = b.find(seed);
    if (it == b.end()) continue;
    const double va = metric(*ca), vb = metric(*it->second);
    p.mean_a += va;
    p.mean_b += vb;
    d.push_back(va - vb);
  }
  p.n = d.size();
  if (p.n == 0) return p;
  p.mean_a /= p.n;
  p.mean_b /= p.n;
  const Summary s = summarize(d);
  p.mean_diff = s.mean;
  p.stderr_diff = s.stddev / std::sqrt(static_cast<double>(p.n));
  return p;
}

std::string fmt_double(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

// 1
Result routing_correctness() {
  const auto start = Clock::now();
  std::mt19937_64 g(2025);
  std::normal_distribution<float> normal(0.0f, 2.0f);
  const int sizes[] = {4, 8, 16};
  int index_mismatch = 0, weight_mismatch = 0, dense_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int e = sizes[trial % 3];
    const int k = 1 + static_cast<int>(g() % e);
    std::vector<float> logits(e);
    for (float& v : logits) v = normal(g);
    if (trial % 10 == 0) logits[e - 1] = logits[0];
    const moe::GatingDecision got = moe::top_k_route(logits, k);
    std::vector<int> idx;
    std::vector<double> w;
    oracle::route(logits, k, idx, w);
    if (got.expert_indices != idx) ++index_mismatch;
    for (std::size_t i = 0; i < w.size() && i < got.gate_weights.size(); ++i) {
      if (std::abs(got.gate_weights[i] - w[i]) > 1e-6) ++weight_mismatch;
    }
    const moe::GatingDecision dense = moe::top_k_route(logits, e);
    const std::vector<double> p = oracle::softmax(logits);
    for (std::size_t i = 0; i < dense.expert_indices.size(); ++i) {
      if (std::abs(dense.gate_weights[i] - p[dense.expert_indices[i]]) > 1e-6) ++dense_mismatch;
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return {index_mismatch == 0 && weight_mismatch == 0 && dense_mismatch == 0 && secs < 1.0,
          "1000 vectors, index mismatches " + std::to_string(index_mismatch) +
              ", weight mismatches " + std::to_string(weight_mismatch) + ", dense mismatches " +
              std::to_string(dense_mismatch) + ", " + fmt_double(secs, 3) + " s"};
}

// 2
Result dense_mixture() {
  moe::MoEConfig c;
  c.num_experts = 8;
  c.model_dim = 32;
  c.ff_dim = 48;
  const moe::ModelWeights w = moe::ModelWeights::random(c, 99);
  std::mt19937_64 g(7);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> h(c.model_dim);
    for (float& v : h) v = normal(g);
    const int k = 1 + trial % 8;
    const auto& layer = w.params().layers[trial % c.num_layers];
    const std::vector<float> got = moe::moe_layer_forward(h, k, layer);
    const std::vector<double> ref = oracle::dense_masked_moe(h, k, layer);
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - ref[i]));
  }
  return {worst < 1e-5, "100 inputs, max abs error " + std::to_string(worst)};
}

// 3
Result inheritance_invariant() {
  const auto suite = generate_synthetic_suite(0, figure1_suite());
  const ScriptedPolicy policy;
  const OracleVerifier verifier(OracleVerifierConfig{0.9, 0.0, 0});
  SearchConfig config;
  config.strategy = Strategy::des;
  config.n = 32;
  config.max_steps = 10;
  long trajectories = 0, violations = 0, trace_violations = 0;
  for (const Problem& p : suite) {
    const SearchOutcome o = run_des(p, config, policy, verifier);
    for (const Rollout& r : o.rollouts) {
      ++trajectories;
      bool ok = !r.step_ks.empty();
      for (int k : r.step_ks) ok = ok && k == r.step_ks.front() && k == r.k;
      if (!ok) ++violations;
    }
    // Survivors of step t must be the only expert counts live at step t + 1.
    for (std::size_t t = 1; t < o.trace.size(); ++t) {
      const std::set<int> kept(o.trace[t - 1].retained_ks.begin(), o.trace[t - 1].retained_ks.end());
      for (int k : o.trace[t].live_ks) {
        if (!kept.contains(k)) ++trace_violations;
      }
    }
  }
  return {violations == 0 && trace_violations == 0,
          std::to_string(trajectories) + " trajectories over 500 problems, " +
              std::to_string(violations) + " with a k change, " +
              std::to_string(trace_violations) + " lineage gaps"};
}

// 5
Result degeneracy() {
  const auto suite = generate_synthetic_suite(5, [] {
    SuiteParams s = figure1_suite();
    s.n_problems = 100;
    return s;
  }());
  const ScriptedPolicy policy;
  const OracleVerifier verifier(OracleVerifierConfig{0.8, 0.3, 11});
  const int default_k = 8;
  int mismatched = 0;
  for (const Problem& p : suite) {
    SearchConfig des_config;
    des_config.strategy = Strategy::des;
    des_config.n = 32;
    des_config.k_set = {default_k};
    des_config.global_seed = 17;
    SearchConfig beam = des_config;
    beam.strategy = Strategy::beam;
    beam.fixed_k = default_k;
    const SearchOutcome a = run_des(p, des_config, policy, verifier);
    const SearchOutcome b = run_beam_search(p, beam, policy, verifier);
    bool same = a.rollouts.size() == b.rollouts.size() && a.trace.size() == b.trace.size();
    for (std::size_t i = 0; same && i < a.rollouts.size(); ++i) {
      const Rollout& x = a.rollouts[i];
      const Rollout& y = b.rollouts[i];
      same = x.final_text == y.final_text && x.reward == y.reward && x.tokens == y.tokens &&
             x.step_ks == y.step_ks && x.extracted_answer == y.extracted_answer;
    }
    for (std::size_t t = 0; same && t < a.trace.size(); ++t) {
      same = a.trace[t].allocation == b.trace[t].allocation &&
             a.trace[t].retained_ks == b.trace[t].retained_ks;
    }
    same = same && a.selected_by_reward == b.selected_by_reward &&
           a.selected_by_vote == b.selected_by_vote;
    if (!same) ++mismatched;
  }
  return {mismatched == 0, "100 problems, " + std::to_string(mismatched) + " differ"};
}

// 6
Result figure1() {
  const auto start = Clock::now();
  ExperimentConfig c = base_config();
  c.strategies = {Strategy::best_of_n};
  c.n_values = {32};
  c.fixed_ks = {4, 5, 6, 7, 8, 9, 10, 11};
  const ExperimentReport r = run_grid(c);
  double lo = 1, hi = 0;
  std::string accs;
  for (const CellReport& cell : r.cells) {
    lo = std::min(lo, cell.metrics.accuracy);
    hi = std::max(hi, cell.metrics.accuracy);
    accs += (accs.empty() ? "" : " ") + fmt_double(100 * cell.metrics.accuracy, 1);
  }
  const double jaccard = r.jaccard.empty() ? 1.0 : r.jaccard.front().mean_off_diagonal;
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return {r.cells.size() == 8 && 100 * (hi - lo) <= 5.0 && jaccard < 0.35 && secs < 120,
          "per-k Acc% [" + accs + "], band " + fmt_double(100 * (hi - lo), 2) +
              " pts, mean off-diagonal Jaccard " + fmt_double(jaccard, 3) + ", " +
              fmt_double(secs, 1) + " s"};
}

// 7
Result des_advantage() {
  ExperimentConfig c = base_config();
  c.strategies = {Strategy::des, Strategy::beam};
  c.n_values = {32};
  c.m = 8;
  c.fixed_ks = {8};
  c.seeds = seeds(20);
  const ExperimentReport r = run_grid(c);
  const auto des = by_seed(r, [](const Cell& x) { return x.strategy == Strategy::des; });
  const auto beam = by_seed(r, [](const Cell& x) { return x.strategy == Strategy::beam; });
  const Paired p = paired(des, beam, [](const CellReport& x) { return x.metrics.accuracy; });
  const double lower = p.mean_diff - 2 * p.stderr_diff;
  return {p.n == 20 && p.mean_a > p.mean_b && lower > 0,
          "DES Acc " + fmt_double(100 * p.mean_a, 2) + "% vs beam(k=8) " +
              fmt_double(100 * p.mean_b, 2) + "% over " + std::to_string(p.n) +
              " seeds, paired diff " + fmt_double(100 * p.mean_diff, 2) + " - 2 x " +
              fmt_double(100 * p.stderr_diff, 2) + " = " + fmt_double(100 * lower, 2) + " pts"};
}

// 8
Result exploration_gain() {
  ExperimentConfig c = base_config();
  c.strategies = {Strategy::beam};
  c.n_values = {32, 64, 128};
  c.fixed_ks = {8};
  c.seeds = seeds(20);
  c.exploration = false;
  const ExperimentReport vanilla = run_grid(c);
  c.exploration = true;
  const ExperimentReport explore = run_grid(c);
  bool pass = true;
  std::string detail;
  for (int n : c.n_values) {
    const auto a = by_seed(explore, [n](const Cell& x) { return x.n == n; });
    const auto b = by_seed(vanilla, [n](const Cell& x) { return x.n == n; });
    const Paired p = paired(a, b, [](const CellReport& x) { return x.metrics.accuracy; });
    pass = pass && p.n == 20 && p.mean_a > p.mean_b;
    detail += (detail.empty() ? "" : "; ") + std::string("N=") + std::to_string(n) + " " +
              fmt_double(100 * p.mean_a, 2) + "% vs " + fmt_double(100 * p.mean_b, 2) + "%";
  }
  return {pass, "beam with exploration vs vanilla, mean Acc over 20 seeds: " + detail};
}

// 9
Result inheritance_gain() {
  ExperimentConfig c = base_config();
  c.verifier.kind = VerifierKind::noisy;
  c.verifier.fidelity = 0.9;
  c.verifier.noise_sigma = 0.5;
  c.strategies = {Strategy::des};
  c.n_values = {32};
  c.seeds = seeds(20);
  c.inheritance = true;
  const ExperimentReport with = run_grid(c);
  c.inheritance = false;
  const ExperimentReport without = run_grid(c);
  const auto all = [](const Cell&) { return true; };
  const Paired p = paired(by_seed(with, all), by_seed(without, all),
                          [](const CellReport& x) { return x.metrics.pass_at_n(32); });
  return {p.n == 20 && p.mean_a > p.mean_b,
          "pass@32 with inheritance " + fmt_double(100 * p.mean_a, 2) + "% vs without " +
              fmt_double(100 * p.mean_b, 2) + "% over " + std::to_string(p.n) +
              " seeds (noisy verifier, fidelity 0.9, sigma 0.5), paired diff " +
              fmt_double(100 * p.mean_diff, 2) + " +- " + fmt_double(100 * p.stderr_diff, 2) +
              " pts"};
}

// 10
Result average_k() {
  ExperimentConfig c = base_config();
  c.verifier.kind = VerifierKind::constant;
  c.strategies = {Strategy::des};
  c.n_values = {32};
  for (int lo = 2; lo <= 10; ++lo) {
    std::vector<int> window(8);
    std::iota(window.begin(), window.end(), lo);
    c.k_sets.push_back(window);
  }
  c.k_sets.erase(c.k_sets.begin());  // drop the default, re-added in order above
  const ExperimentReport r = run_grid(c);
  std::map<int, double> mean_by_low;
  for (const CellReport& cell : r.cells) mean_by_low[cell.cell.k_set.front()] = cell.avg_k;
  const double base = mean_by_low.count(4) ? mean_by_low[4] : 0.0;
  bool monotone = mean_by_low.size() == 9;
  double prev = -1;
  std::string series;
  for (const auto& [low, mean] : mean_by_low) {
    monotone = monotone && mean > prev;
    prev = mean;
    series += (series.empty() ? "" : " ") + std::to_string(low) + "-" + std::to_string(low + 7) +
              ":" + fmt_double(mean, 2);
  }
  return {std::abs(base - 7.5) <= 0.5 && monotone,
          "k_set 4-11 mean k " + fmt_double(base, 3) + "; windows " + series};
}

// 11
Result metrics_oracle() {
  std::mt19937_64 g(1234);
  int mismatches = 0, non_monotone = 0, token_mismatches = 0, sets = 0;
  for (int trial = 0; trial < 50; ++trial) {
    ExperimentConfig c;
    c.suite.n_problems = 10 + static_cast<int>(g() % 30);
    c.suite.p_good = 0.5 + 0.5 * std::uniform_real_distribution<double>()(g);
    c.suite.p_bad = 0.3 * std::uniform_real_distribution<double>()(g);
    c.suite.sensitivity = std::uniform_real_distribution<double>()(g);
    c.suite.answer_space = 2 + static_cast<int>(g() % 8);  // frequent vote collisions
    c.suite_seed = g();
    const Strategy strategies[] = {Strategy::best_of_n, Strategy::beam, Strategy::dvts,
                                   Strategy::des};
    c.strategies = {strategies[g() % 4]};
    c.n_values = {8 + static_cast<int>(g() % 33)};
    c.seeds = {g() % 1000};
    c.verifier.kind = VerifierKind::noisy;
    c.verifier.fidelity = 0.7;
    c.verifier.noise_sigma = 0.3;
    c.results = work_dir / ("oracle_" + std::to_string(trial) + ".jsonl");
    fs::remove(c.results);
    run_experiment(c);

    // Independent recount straight from the persisted JSON.
    std::ifstream in(c.results);
    std::string line;
    double correct_vote = 0, precision = 0, tokens = 0;
    int problems = 0, n = c.n_values.front();
    std::vector<double> pass(n + 1, 0.0);
    while (std::getline(in, line)) {
      const nlohmann::json j = nlohmann::json::parse(line);
      if (j["status"] != "ok") continue;
      ++problems;
      const std::string gold = j["gold"];
      std::vector<std::string> order;
      std::map<std::string, std::pair<int, double>> buckets;
      int correct = 0, first_correct = -1, idx = 0;
      for (const auto& r : j["rollouts"]) {
        tokens += r["tokens"].get<double>();
        if (r["tokens"].get<long>() != 32L * r["steps"].get<long>()) ++token_mismatches;
        if (!r["answer"].is_null()) {
          const std::string a = r["answer"];
          if (a == gold) {
            ++correct;
            if (first_correct < 0) first_correct = idx;
          }
          if (!buckets.contains(a)) order.push_back(a);
          buckets[a].first += 1;
          buckets[a].second += r["reward"].get<double>();
        }
        ++idx;
      }
      std::string winner;
      for (const std::string& a : order) {
        if (winner.empty() || buckets[a].first > buckets[winner].first ||
            (buckets[a].first == buckets[winner].first && buckets[a].second > buckets[winner].second)) {
          winner = a;
        }
      }
      correct_vote += (!winner.empty() && winner == gold) ? 1 : 0;
      precision += static_cast<double>(correct) / idx;
      for (int b = 1; b <= n; ++b) pass[b] += (first_correct >= 0 && first_correct < b) ? 1 : 0;
    }
    const ExperimentReport r = build_report(read_records(c.results));
    if (r.cells.size() != 1 || problems == 0) {
      ++mismatches;
      continue;
    }
    ++sets;
    const MetricTable& m = r.cells.front().metrics;
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    if (!near(m.accuracy, correct_vote / problems)) ++mismatches;
    if (!near(m.precision, precision / problems)) ++mismatches;
    if (!near(m.avg_gen_tokens, tokens / problems)) ++mismatches;
    double prev = -1;
    for (const auto& [b, v] : m.pass_at) {
      if (!near(v, pass[b] / problems)) ++mismatches;
      if (v < prev) ++non_monotone;
      prev = v;
    }
  }
  return {sets == 50 && mismatches == 0 && non_monotone == 0 && token_mismatches == 0,
          std::to_string(sets) + " result sets, " + std::to_string(mismatches) +
              " metric mismatches, " + std::to_string(non_monotone) + " pass@n decreases, " +
              std::to_string(token_mismatches) + " token recount mismatches"};
}

std::map<std::string, std::string> report_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const char* name : {"cells.csv", "summary.csv", "timesteps.csv", "jaccard.csv", "report.txt"}) {
    std::ifstream in(dir / name, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[name] = s.str();
  }
  return out;
}

std::size_t count_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return static_cast<std::size_t>(std::count(std::istreambuf_iterator<char>(in),
                                             std::istreambuf_iterator<char>(), '\n'));
}

int run_cli(const std::vector<std::string>& args, std::optional<std::size_t> kill_at_lines,
            const fs::path& results, bool* killed) {
  const pid_t pid = fork();
  if (pid == 0) {
    const int devnull = ::open("/dev/null", O_WRONLY);
    dup2(devnull, 1);
    dup2(devnull, 2);
    std::vector<char*> argv;
    argv.push_back(const_cast<char*>(cli_path.c_str()));
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    execv(cli_path.c_str(), argv.data());
    _exit(127);
  }
  int status = 0;
  if (kill_at_lines) {
    while (waitpid(pid, &status, WNOHANG) == 0) {
      if (fs::exists(results) && count_lines(results) >= *kill_at_lines) {
        kill(pid, SIGKILL);
        waitpid(pid, &status, 0);
        *killed = true;
        return -1;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 12
Result determinism_and_resume() {
  ExperimentConfig c = base_config();
  c.suite.n_problems = 200;
  c.strategies = {Strategy::best_of_n, Strategy::beam, Strategy::dvts, Strategy::des};
  c.n_values = {16};
  c.seeds = seeds(2);
  c.verifier.kind = VerifierKind::noisy;
  c.verifier.noise_sigma = 0.3;

  c.workers = 1;
  c.report_dir = work_dir / "det_w1";
  fs::remove_all(c.report_dir);
  run_grid(c);
  const auto reference = report_files(c.report_dir);

  c.workers = 4;
  c.report_dir = work_dir / "det_w4";
  fs::remove_all(c.report_dir);
  run_grid(c);
  const bool workers_equal = report_files(c.report_dir) == reference;

  // In-process interruption at several points, with a torn final line.
  c.results = work_dir / "resume.jsonl";
  fs::remove(c.results);
  c.report_dir = work_dir / "det_resume";
  fs::remove_all(c.report_dir);
  for (std::size_t stop : {137u, 411u, 1002u}) {
    c.stop_after = stop;
    c.workers = stop % 2 ? 3 : 1;
    run_experiment(c);
    std::ofstream(c.results, std::ios::app | std::ios::binary) << "{\"fingerprint\":\"0";
  }
  c.stop_after.reset();
  run_grid(c);
  const bool resume_equal = report_files(c.report_dir) == reference;

  // A real SIGKILL of the CLI midway through the same grid.
  bool killed = false, cli_equal = false;
  if (!cli_path.empty()) {
    const fs::path results = work_dir / "killed.jsonl";
    const fs::path report = work_dir / "killed_report";
    const fs::path clean_report = work_dir / "clean_report";
    fs::remove(results);
    fs::remove_all(report);
    fs::remove_all(clean_report);
    const std::vector<std::string> args{
        "run", "--strategy", "best_of_n,beam,dvts,des", "--n", "16", "--seeds", "0-7",
        "--suite-size", "500", "--verifier", "noisy", "--fidelity", "0.9",
        "--noise-sigma", "0.3", "--workers", "2"};
    auto with = [&](std::vector<std::string> extra) {
      std::vector<std::string> all = args;
      all.insert(all.end(), extra.begin(), extra.end());
      return all;
    };
    run_cli(with({"--out", results.string()}), 5000, results, &killed);
    const int resumed = run_cli(with({"--out", results.string(), "--report", report.string()}),
                                std::nullopt, results, nullptr);
    const int clean = run_cli(with({"--report", clean_report.string()}), std::nullopt, results,
                              nullptr);
    cli_equal = killed && resumed == 0 && clean == 0 &&
                report_files(report) == report_files(clean_report) &&
                !report_files(clean_report)["cells.csv"].empty();
  }
  return {workers_equal && resume_equal && cli_equal,
          std::string("workers 1 vs 4 ") + (workers_equal ? "identical" : "DIFFER") +
              ", resumed after 3 interruptions " + (resume_equal ? "identical" : "DIFFERS") +
              ", CLI killed mid-run " + (killed ? "and resumed " : "(kill missed) ") +
              (cli_equal ? "identical" : "DIFFERS")};
}

// 4, after every other grid has contributed its audit.
Result budget_exactness() {
  ExperimentConfig c = base_config();
  c.strategies = {Strategy::best_of_n, Strategy::beam, Strategy::dvts, Strategy::des};
  c.n_values = {8, 16, 32, 64, 128};
  run_grid(c);
  c.exploration = true;
  c.inheritance = false;
  c.strategies = {Strategy::beam, Strategy::dvts, Strategy::des, Strategy::best_of_n};
  run_grid(c);
  const bool pass = audit.wrong_rollout_counts == 0 && audit.budget_violations == 0 &&
                    audit.inheritance_violations == 0;
  return {pass, std::to_string(audit.cells) + " cells, " + std::to_string(audit.records) +
                    " problem runs, " + std::to_string(audit.wrong_rollout_counts) +
                    " wrong rollout counts, " + std::to_string(audit.budget_violations) +
                    " allocation violations, " + std::to_string(audit.inheritance_violations) +
                    " inheritance violations"};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  if (argc > 1) cli_path = fs::absolute(argv[1]).string();
  work_dir = fs::temp_directory_path() / ("des_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work_dir);

  struct Criterion {
    int id;
    const char* name;
    Result (*run)();
  };
  const Criterion criteria[] = {
      {1, "routing correctness", routing_correctness},
      {2, "dense-mixture equivalence", dense_mixture},
      {3, "inheritance invariant", inheritance_invariant},
      {5, "degeneracy equivalence", degeneracy},
      {6, "per-k accuracy vs overlap", figure1},
      {7, "DES beats fixed-k beam search", des_advantage},
      {8, "exploration beats vanilla beam search", exploration_gain},
      {9, "inheritance improves pass@N", inheritance_gain},
      {10, "average-k accounting", average_k},
      {11, "metrics oracle equivalence", metrics_oracle},
      {12, "determinism and resume", determinism_and_resume},
      {4, "budget exactness", budget_exactness},
  };
  std::map<int, std::string> lines;
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    failures += r.pass ? 0 : 1;
    std::ostringstream line;
    line << (r.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name
         << "): " << r.detail << " [" << fmt_double(secs, 1) << " s]";
    std::cout << line.str() << std::endl;
    lines[c.id] = line.str();
  }
  std::cout << "\nsummary by criterion\n";
  for (const auto& [id, line] : lines) std::cout << line << '\n';
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  fs::remove_all(work_dir);
  return failures == 0 ? 0 : 1;
}
