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

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "des/errors.hpp"
#include "des/experiment.hpp"
#include "des/moe.hpp"
#include "des/report.hpp"
#include "des/suite.hpp"

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// "4-11", "4,6,8" or a mix such as "2,4-6".
std::vector<long long> parse_range_list(const std::string& text) {
  std::vector<long long> out;
  for (const std::string& part : split(text, ',')) {
    const std::size_t dash = part.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(std::stoll(part));
      continue;
    }
    const long long lo = std::stoll(part.substr(0, dash));
    const long long hi = std::stoll(part.substr(dash + 1));
    if (hi < lo) throw des::InvalidConfig("empty range '" + part + "'");
    for (long long v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw des::InvalidConfig("empty list '" + text + "'");
  return out;
}

std::vector<int> to_ints(const std::vector<long long>& values) {
  return {values.begin(), values.end()};
}

struct SuiteFlags {
  int size = 500;
  std::string k_range = "4-11";
  int set_size = 2;
  double sensitivity = 1.0;
  double p_good = 0.9;
  double p_bad = 0.1;
  int answer_space = 100;
  std::string solution_steps = "3-8";
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--suite-size", size, "Synthetic problems to generate");
    app->add_option("--k-range", k_range, "Expert counts of the synthetic suite, e.g. 4-11");
    app->add_option("--effective-set-size", set_size, "Effective expert counts per problem");
    app->add_option("--sensitivity", sensitivity, "Probability a problem is k-sensitive");
    app->add_option("--p-good", p_good, "Step accuracy under an effective k");
    app->add_option("--p-bad", p_bad, "Step accuracy under other k");
    app->add_option("--answer-space", answer_space, "Answers are drawn from [0, N)");
    app->add_option("--solution-steps", solution_steps, "Range of solution lengths, e.g. 3-8");
    app->add_option("--suite-seed", seed, "Seed of the synthetic suite");
  }

  des::SuiteParams params() const {
    des::SuiteParams p;
    p.n_problems = size;
    const std::vector<int> ks = to_ints(parse_range_list(k_range));
    p.k_min = *std::min_element(ks.begin(), ks.end());
    p.k_max = *std::max_element(ks.begin(), ks.end());
    p.effective_set_size = set_size;
    p.sensitivity = sensitivity;
    p.p_good = p_good;
    p.p_bad = p_bad;
    p.answer_space = answer_space;
    const std::vector<int> steps = to_ints(parse_range_list(solution_steps));
    p.min_steps = steps.front();
    p.max_steps = steps.back();
    return p;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic experts search: test-time search over MoE expert counts"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // run
  CLI::App* run = app.add_subcommand("run", "Run a strategy x budget x seed grid");
  std::string strategies = "des", n_values = "32", seeds = "0", fixed_ks = "8";
  std::vector<std::string> k_sets;
  des::ExperimentConfig config;
  SuiteFlags run_suite;
  std::string policy = "synthetic", verifier = "oracle", aggregation = "last";
  std::string problems, results, report_dir;
  bool no_inheritance = false, no_exploration = false, exploration = false;
  run->add_option("--strategy", strategies, "Comma list of best_of_n, beam, dvts, des");
  run->add_option("--n", n_values, "Rollout budgets, e.g. 32 or 8,16,32");
  run->add_option("--m", config.m, "Candidates kept per step (default n/4)");
  run->add_option("--max-steps", config.max_steps, "Maximum reasoning steps T");
  run->add_option("--k-set", k_sets, "Initial expert counts, e.g. 4-11; repeat to sweep");
  run->add_option("--fixed-k", fixed_ks, "Expert counts of fixed-k strategies, e.g. 4-11");
  run->add_option("--temperature", config.temperature, "Sampling temperature");
  run->add_option("--seed,--seeds", seeds, "Global seeds, e.g. 0 or 0-19");
  run->add_option("--policy", policy, "synthetic, toy or remote")
      ->check(CLI::IsMember({"synthetic", "toy", "remote"}));
  run->add_option("--weights", config.policy.weights, "Toy model weights file");
  run->add_option("--weights-seed", config.policy.weights_seed, "Seed of random toy weights");
  run->add_option("--verifier", verifier, "oracle, noisy, constant or remote")
      ->check(CLI::IsMember({"oracle", "noisy", "constant", "remote"}));
  run->add_option("--fidelity", config.verifier.fidelity, "Oracle verifier fidelity");
  run->add_option("--noise-sigma", config.verifier.noise_sigma, "Noisy verifier sigma");
  run->add_option("--constant", config.verifier.constant, "Constant verifier reward");
  run->add_option("--aggregation", aggregation, "Remote step score aggregation")
      ->check(CLI::IsMember({"last", "min", "product"}));
  run->add_option("--problems", problems, "Problem JSONL (default: synthetic suite)");
  run->add_option("--out", results, "Raw results JSONL; resumes when present");
  run->add_option("--report", report_dir, "Directory for report CSVs and table");
  run->add_option("--workers", config.workers, "Concurrent problems per cell");
  run->add_flag("--no-inheritance", no_inheritance, "DES: cycle k at every step");
  run->add_flag("--no-exploration", no_exploration, "Never vary k across children");
  run->add_flag("--exploration", exploration, "Vary k across children for every strategy");
  run_suite.add(run);

  // gen-suite
  CLI::App* gen = app.add_subcommand("gen-suite", "Write a synthetic problem suite");
  SuiteFlags gen_suite;
  std::string gen_out;
  gen_suite.add(gen);
  gen->add_option("--out", gen_out, "Output JSONL")->required();

  // report
  CLI::App* rep = app.add_subcommand("report", "Rebuild the report from raw results");
  std::string rep_results, rep_dir;
  rep->add_option("--results", rep_results, "Raw results JSONL")->required();
  rep->add_option("--report", rep_dir, "Directory for report CSVs and table");

  // init-model
  CLI::App* init = app.add_subcommand("init-model", "Write random toy model weights");
  des::moe::MoEConfig model;
  std::uint64_t model_seed = 0;
  std::string model_out;
  init->add_option("--out", model_out, "Weights file")->required();
  init->add_option("--seed", model_seed, "Initialization seed");
  init->add_option("--experts", model.num_experts, "Experts per MoE layer");
  init->add_option("--default-k", model.default_k, "Default activated experts");
  init->add_option("--d-model", model.model_dim, "Hidden size");
  init->add_option("--d-ff", model.ff_dim, "Expert hidden size");
  init->add_option("--layers", model.num_layers, "Transformer layers");
  init->add_option("--max-seq", model.max_seq_len, "Context length");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*gen) {
      const auto suite = des::generate_synthetic_suite(gen_suite.seed, gen_suite.params());
      des::write_problems(gen_out, suite);
      spdlog::info("wrote {} problems to {}", suite.size(), gen_out);
      return 0;
    }
    if (*init) {
      des::moe::ModelWeights::random(model, model_seed).save(model_out);
      spdlog::info("wrote toy model to {}", model_out);
      return 0;
    }
    if (*rep) {
      const auto records = des::read_records(rep_results);
      const des::ExperimentReport report = des::build_report(records);
      if (!rep_dir.empty()) des::write_report(report, rep_dir);
      std::cout << des::format_table(report);
      for (const des::CellReport& c : report.cells) {
        if (c.fatal) return 1;
      }
      return 0;
    }

    config.strategies.clear();
    for (const std::string& s : split(strategies, ',')) {
      config.strategies.push_back(des::parse_strategy(s));
    }
    config.n_values = to_ints(parse_range_list(n_values));
    config.fixed_ks = to_ints(parse_range_list(fixed_ks));
    if (!k_sets.empty()) {
      config.k_sets.clear();
      for (const std::string& k : k_sets) config.k_sets.push_back(to_ints(parse_range_list(k)));
    }
    config.seeds.clear();
    for (long long s : parse_range_list(seeds)) config.seeds.push_back(static_cast<std::uint64_t>(s));
    config.inheritance = !no_inheritance;
    if (no_exploration && exploration) {
      throw des::InvalidConfig("--exploration and --no-exploration are exclusive");
    }
    if (no_exploration) config.exploration = false;
    if (exploration) config.exploration = true;
    config.problems = problems;
    config.suite = run_suite.params();
    config.suite_seed = run_suite.seed;
    config.results = results;
    config.report_dir = report_dir;
    config.policy.kind = des::parse_policy_kind(policy);
    if (config.policy.kind == des::PolicyKind::remote) {
      config.policy.endpoint = des::RemoteEndpoint::from_env("DES_POLICY");
    }
    config.verifier.kind = des::parse_verifier_kind(verifier);
    config.verifier.aggregation = des::parse_aggregation_mode(aggregation);
    if (config.verifier.kind == des::VerifierKind::remote) {
      config.verifier.endpoint = des::RemoteEndpoint::from_env("DES_PRM");
    }

    const des::RunSummary summary = des::run_experiment(config);
    std::cout << des::format_table(des::build_report(summary.records));
    spdlog::info("{} results computed, {} resumed, {} failed problems", summary.computed,
                 summary.resumed, summary.failed_problems);
    return summary.fatal_cells.empty() && !summary.interrupted ? 0 : 1;
  } catch (const des::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
