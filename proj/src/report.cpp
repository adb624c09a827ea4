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

#include "des/report.hpp"

#include <spdlog/fmt/fmt.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "des/errors.hpp"

namespace des {

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

std::string join_ints(const std::vector<int>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

CellReport build_cell(const std::vector<const RawRecord*>& records) {
  CellReport cell;
  std::vector<const RawRecord*> ok;
  bool marker = false;
  for (const RawRecord* r : records) {
    cell.cell = r->cell;
    cell.key = r->cell_key;
    cell.suite_size = std::max(cell.suite_size, r->suite_size);
    if (r->status == "ok") {
      ok.push_back(r);
    } else if (r->status == "error") {
      ++cell.problems_failed;
    } else {
      marker = true;
      cell.error = r->error;
    }
  }
  cell.problems_ok = ok.size();
  cell.fatal = marker && cell.problems_ok + cell.problems_failed < cell.suite_size;
  if (!cell.fatal) cell.error.clear();
  std::sort(ok.begin(), ok.end(),
            [](const RawRecord* a, const RawRecord* b) { return a->problem_id < b->problem_id; });

  std::vector<ProblemResult> results;
  results.reserve(ok.size());
  std::int64_t steps = 0, k_sum = 0, all_tokens = 0;
  std::vector<std::int64_t> steps_by_t, k_by_t;
  for (const RawRecord* r : ok) {
    results.push_back(
        ProblemResult::from_rollouts(r->problem_id, r->gold_answer, r->task_kind, r->rollouts));
    if (results.back().solved_by_vote) cell.solved.insert(r->problem_id);
    steps += r->generated_steps;
    k_sum += r->generated_k_sum;
    all_tokens += r->generated_tokens;
    cell.budget_violations += r->audit.budget_violations;
    cell.inheritance_violations += r->audit.inheritance_violations;
    if (steps_by_t.size() < r->steps_by_t.size()) {
      steps_by_t.resize(r->steps_by_t.size(), 0);
      k_by_t.resize(r->steps_by_t.size(), 0);
    }
    for (std::size_t t = 0; t < r->steps_by_t.size(); ++t) {
      steps_by_t[t] += r->steps_by_t[t];
      k_by_t[t] += r->k_sum_by_t[t];
    }
  }
  const std::vector<int> budgets = default_pass_budgets(cell.cell.n);
  cell.metrics = compute_metrics(results, budgets);
  cell.avg_k = steps > 0 ? static_cast<double>(k_sum) / static_cast<double>(steps) : 0.0;
  for (std::size_t t = 0; t < steps_by_t.size(); ++t) {
    cell.per_timestep_avg_k.push_back(
        steps_by_t[t] > 0 ? static_cast<double>(k_by_t[t]) / static_cast<double>(steps_by_t[t])
                          : 0.0);
  }
  cell.avg_all_gen_tokens =
      ok.empty() ? 0.0 : static_cast<double>(all_tokens) / static_cast<double>(ok.size());
  return cell;
}

}  // namespace

ExperimentReport build_report(std::span<const RawRecord> records) {
  std::map<std::pair<std::string, std::string>, const RawRecord*> latest;
  for (const RawRecord& r : records) latest[{r.cell_key, r.problem_id}] = &r;
  std::map<std::string, std::vector<const RawRecord*>> by_cell;
  for (const auto& [id, r] : latest) by_cell[id.first].push_back(r);

  ExperimentReport report;
  for (const auto& [key, rs] : by_cell) report.cells.push_back(build_cell(rs));

  std::map<std::string, std::vector<const CellReport*>> by_group;
  for (const CellReport& c : report.cells) {
    if (!c.fatal && c.problems_ok > 0) by_group[c.cell.group_key()].push_back(&c);
  }
  for (const auto& [key, cs] : by_group) {
    GroupReport g;
    g.group_key = key;
    g.cell = cs.front()->cell;
    g.seeds = cs.size();
    std::vector<double> acc, prec, pass, tok, k;
    for (const CellReport* c : cs) {
      acc.push_back(c->metrics.accuracy);
      prec.push_back(c->metrics.precision);
      pass.push_back(c->metrics.pass_at.empty() ? 0.0 : c->metrics.pass_at.back().second);
      tok.push_back(c->metrics.avg_gen_tokens);
      k.push_back(c->avg_k);
    }
    g.accuracy = summarize(acc);
    g.precision = summarize(prec);
    g.pass_at_n = summarize(pass);
    g.gen_tokens = summarize(tok);
    g.avg_k = summarize(k);
    report.groups.push_back(std::move(g));
  }

  std::map<std::string, std::map<int, const CellReport*>> fixed;
  for (const CellReport& c : report.cells) {
    if (c.cell.exploration || c.fatal || c.problems_ok == 0) continue;
    const std::string label = fmt::format("{}|n={}|m={}|seed={}", to_string(c.cell.strategy),
                                          c.cell.n, c.cell.m, c.cell.seed);
    fixed[label][c.cell.fixed_k] = &c;
  }
  for (const auto& [label, by_k] : fixed) {
    if (by_k.size() < 2) continue;
    JaccardBlock block;
    block.label = label;
    std::vector<std::set<std::string>> sets;
    for (const auto& [k, c] : by_k) {
      block.ks.push_back(k);
      sets.push_back(c->solved);
    }
    block.matrix = jaccard_matrix(sets);
    double sum = 0.0;
    const std::size_t size = sets.size();
    for (std::size_t a = 0; a < size; ++a) {
      for (std::size_t b = 0; b < size; ++b) {
        if (a != b) sum += block.matrix[a][b];
      }
    }
    block.mean_off_diagonal = sum / static_cast<double>(size * (size - 1));
    report.jaccard.push_back(std::move(block));
  }
  return report;
}

std::string format_table(const ExperimentReport& report) {
  std::ostringstream out;
  out << fmt::format("{:<48} {:>5} {:>7} {:>7} {:>7} {:>9} {:>6} {:>6}\n", "cell", "probs",
                     "Acc", "Prec", "pass@N", "#Gen.Tok", "avg k", "failed");
  for (const CellReport& c : report.cells) {
    if (c.fatal) {
      out << fmt::format("{:<48} FAILED: {}\n", c.key, c.error);
      continue;
    }
    const double pass = c.metrics.pass_at.empty() ? 0.0 : c.metrics.pass_at.back().second;
    out << fmt::format("{:<48} {:>5} {:>7.2f} {:>7.2f} {:>7.2f} {:>9.1f} {:>6.2f} {:>6}\n",
                       c.key, c.problems_ok, 100.0 * c.metrics.accuracy,
                       100.0 * c.metrics.precision, 100.0 * pass, c.metrics.avg_gen_tokens,
                       c.avg_k, c.problems_failed);
  }
  if (!report.groups.empty()) {
    out << "\n"
        << fmt::format("{:<40} {:>5} {:>15} {:>15} {:>15} {:>11}\n", "group", "seeds",
                       "Acc", "Prec", "pass@N", "avg k");
    for (const GroupReport& g : report.groups) {
      out << fmt::format("{:<40} {:>5} {:>7.2f} +-{:<5.2f} {:>7.2f} +-{:<5.2f} {:>7.2f} +-{:<5.2f} "
                         "{:>5.2f} +-{:.2f}\n",
                         g.group_key, g.seeds, 100.0 * g.accuracy.mean,
                         100.0 * g.accuracy.stddev, 100.0 * g.precision.mean,
                         100.0 * g.precision.stddev, 100.0 * g.pass_at_n.mean,
                         100.0 * g.pass_at_n.stddev, g.avg_k.mean, g.avg_k.stddev);
    }
  }
  for (const JaccardBlock& b : report.jaccard) {
    out << "\nsolved-set Jaccard, " << b.label
        << fmt::format(" (mean off-diagonal {:.3f})\n", b.mean_off_diagonal);
    out << "  k  ";
    for (int k : b.ks) out << fmt::format("{:>6}", k);
    out << '\n';
    for (std::size_t a = 0; a < b.ks.size(); ++a) {
      out << fmt::format("{:>3}  ", b.ks[a]);
      for (double v : b.matrix[a]) out << fmt::format("{:>6.2f}", v);
      out << '\n';
    }
  }
  return out.str();
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidInput("cannot write " + (dir / name).string());
    return f;
  };

  std::ofstream cells = open("cells.csv");
  cells << "cell,strategy,n,m,k_set,fixed_k,inheritance,exploration,seed,problems,failed,"
           "fatal,accuracy,reward_accuracy,precision,pass_at,gen_tokens,all_gen_tokens,avg_k,"
           "budget_violations,inheritance_violations\n";
  for (const CellReport& c : report.cells) {
    std::string pass;
    for (const auto& [n, v] : c.metrics.pass_at) {
      if (!pass.empty()) pass += ';';
      pass += fmt::format("{}:{:.6f}", n, v);
    }
    cells << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{:.6f},{:.6f},{:.6f},{},{:.3f},"
                         "{:.3f},{:.4f},{},{}\n",
                         csv_field(c.key), to_string(c.cell.strategy), c.cell.n, c.cell.m,
                         join_ints(c.cell.k_set, ' '), c.cell.fixed_k, c.cell.inheritance,
                         c.cell.exploration, c.cell.seed, c.problems_ok, c.problems_failed,
                         c.fatal, c.metrics.accuracy, c.metrics.reward_accuracy,
                         c.metrics.precision, pass, c.metrics.avg_gen_tokens,
                         c.avg_all_gen_tokens, c.avg_k, c.budget_violations,
                         c.inheritance_violations);
  }

  std::ofstream summary = open("summary.csv");
  summary << "group,seeds,accuracy_mean,accuracy_std,precision_mean,precision_std,"
             "pass_at_n_mean,pass_at_n_std,gen_tokens_mean,gen_tokens_std,avg_k_mean,"
             "avg_k_std\n";
  for (const GroupReport& g : report.groups) {
    summary << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.3f},{:.3f},"
                           "{:.4f},{:.4f}\n",
                           csv_field(g.group_key), g.seeds, g.accuracy.mean, g.accuracy.stddev,
                           g.precision.mean, g.precision.stddev, g.pass_at_n.mean,
                           g.pass_at_n.stddev, g.gen_tokens.mean, g.gen_tokens.stddev,
                           g.avg_k.mean, g.avg_k.stddev);
  }

  std::ofstream timesteps = open("timesteps.csv");
  timesteps << "cell,timestep,avg_k\n";
  for (const CellReport& c : report.cells) {
    for (std::size_t t = 0; t < c.per_timestep_avg_k.size(); ++t) {
      timesteps << fmt::format("{},{},{:.4f}\n", csv_field(c.key), t, c.per_timestep_avg_k[t]);
    }
  }

  std::ofstream jaccard = open("jaccard.csv");
  jaccard << "group,k_a,k_b,jaccard\n";
  for (const JaccardBlock& b : report.jaccard) {
    for (std::size_t a = 0; a < b.ks.size(); ++a) {
      for (std::size_t c = 0; c < b.ks.size(); ++c) {
        jaccard << fmt::format("{},{},{},{:.6f}\n", csv_field(b.label), b.ks[a], b.ks[c],
                               b.matrix[a][c]);
      }
    }
  }

  std::ofstream text = open("report.txt");
  text << format_table(report);
}

}  // namespace des
