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

#include "des/suite.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <json.hpp>

#include "des/errors.hpp"
#include "des/seed.hpp"

namespace des {

using nlohmann::json;

void SuiteParams::validate() const {
  if (n_problems < 0) throw InvalidConfig("n_problems must be >= 0");
  if (k_min < 1 || k_max < k_min) throw InvalidConfig("k range must satisfy 1 <= k_min <= k_max");
  const int width = k_max - k_min + 1;
  if (effective_set_size < 1 || effective_set_size > width) {
    throw InvalidConfig("effective_set_size " + std::to_string(effective_set_size) +
                        " cannot be balanced over " + std::to_string(width) + " expert counts");
  }
  if (!(sensitivity >= 0.0 && sensitivity <= 1.0)) {
    throw InvalidConfig("sensitivity must lie in [0, 1]");
  }
  if (!(p_good >= 0.0 && p_good <= 1.0 && p_bad >= 0.0 && p_bad <= 1.0)) {
    throw InvalidConfig("p_good and p_bad must lie in [0, 1]");
  }
  if (answer_space < 2) throw InvalidConfig("answer_space must be >= 2");
  if (min_steps < 1 || max_steps < min_steps) {
    throw InvalidConfig("step range must satisfy 1 <= min_steps <= max_steps");
  }
}

std::vector<Problem> generate_synthetic_suite(std::uint64_t seed, const SuiteParams& params) {
  params.validate();
  const int width = params.k_max - params.k_min + 1;
  Rng rng(derive_seed(seed, {0x5717eULL}));
  std::vector<long> count(width, 0);
  std::vector<std::vector<long>> pair(width, std::vector<long>(width, 0));

  std::vector<Problem> suite;
  suite.reserve(params.n_problems);
  for (int i = 0; i < params.n_problems; ++i) {
    EffectiveKProfile profile;
    profile.p_good = params.p_good;
    profile.p_bad = params.p_bad;
    const bool sensitive = uniform01(rng) < params.sensitivity;
    profile.num_steps =
        params.min_steps + static_cast<int>(uniform01(rng) * (params.max_steps - params.min_steps + 1));
    profile.num_steps = std::min(profile.num_steps, params.max_steps);
    const int gold = static_cast<int>(uniform01(rng) * params.answer_space) % params.answer_space;

    std::vector<int> chosen;
    if (sensitive) {
      for (int s = 0; s < params.effective_set_size; ++s) {
        int best = -1;
        long best_count = 0, best_overlap = 0;
        std::uint64_t best_tie = 0;
        for (int j = 0; j < width; ++j) {
          if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
          long overlap = 0;
          for (int c : chosen) overlap += pair[c][j];
          const std::uint64_t tie = rng();
          if (best < 0 || count[j] < best_count ||
              (count[j] == best_count &&
               (overlap < best_overlap || (overlap == best_overlap && tie < best_tie)))) {
            best = j;
            best_count = count[j];
            best_overlap = overlap;
            best_tie = tie;
          }
        }
        chosen.push_back(best);
      }
      for (int a : chosen) {
        count[a] += 1;
        for (int b : chosen) {
          if (a != b) pair[a][b] += 1;
        }
      }
    } else {
      chosen.resize(width);
      std::iota(chosen.begin(), chosen.end(), 0);
    }
    for (int j : chosen) profile.effective_ks.push_back(params.k_min + j);
    std::sort(profile.effective_ks.begin(), profile.effective_ks.end());

    char id[32];
    std::snprintf(id, sizeof id, "syn-%04d", i);
    Problem p;
    p.id = id;
    p.prompt = "Synthetic problem " + std::to_string(i) + ": reach the hidden answer in " +
               std::to_string(profile.num_steps) + " steps.";
    p.gold_answer = std::to_string(gold);
    p.task_kind = TaskKind::math;
    p.profile = std::move(profile);
    suite.push_back(std::move(p));
  }
  return suite;
}

std::string problem_to_json_line(const Problem& problem) {
  json j = {{"id", problem.id},
            {"prompt", problem.prompt},
            {"answer", problem.gold_answer},
            {"task", std::string(to_string(problem.task_kind))}};
  if (problem.profile) {
    j["profile"] = {{"effective_ks", problem.profile->effective_ks},
                    {"p_good", problem.profile->p_good},
                    {"p_bad", problem.profile->p_bad},
                    {"num_steps", problem.profile->num_steps}};
  }
  return j.dump();
}

namespace {

std::string required_string(const json& j, const char* field, std::size_t line) {
  if (!j.contains(field) || !j.at(field).is_string()) {
    throw ValidationError("line " + std::to_string(line) + ": field '" + field +
                          "' missing or not a string");
  }
  return j.at(field).get<std::string>();
}

}  // namespace

std::vector<Problem> load_problems(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open problem file " + path.string());
  std::vector<Problem> out;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, e.what());
    }
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    Problem p;
    p.id = required_string(j, "id", line);
    p.prompt = required_string(j, "prompt", line);
    if (j.contains("answer") && j.at("answer").is_number()) {
      p.gold_answer = j.at("answer").dump();
    } else {
      p.gold_answer = required_string(j, "answer", line);
    }
    try {
      p.task_kind = parse_task_kind(required_string(j, "task", line));
      if (j.contains("profile") && !j.at("profile").is_null()) {
        const json& pj = j.at("profile");
        EffectiveKProfile profile;
        profile.effective_ks = pj.at("effective_ks").get<std::vector<int>>();
        profile.p_good = pj.value("p_good", profile.p_good);
        profile.p_bad = pj.value("p_bad", profile.p_bad);
        profile.num_steps = pj.value("num_steps", profile.num_steps);
        profile.validate();
        p.profile = std::move(profile);
      }
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(line) + ": bad profile: " + e.what());
    }
    if (!ids.insert(p.id).second) {
      throw ValidationError("line " + std::to_string(line) + ": duplicate id '" + p.id + "'");
    }
    out.push_back(std::move(p));
  }
  if (out.empty()) spdlog::warn("problem file {} is empty", path.string());
  return out;
}

void write_problems(const std::filesystem::path& path, std::span<const Problem> problems) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  for (const Problem& p : problems) out << problem_to_json_line(p) << '\n';
}

}  // namespace des
