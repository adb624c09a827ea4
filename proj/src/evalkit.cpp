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

#include "des/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <limits>
#include <map>
#include <numeric>

#include "des/errors.hpp"

namespace des {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<std::string> non_empty(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  return std::string(s);
}

std::optional<std::string> extract_math(std::string_view text) {
  for (std::size_t pos = text.rfind("boxed{"); pos != std::string_view::npos;
       pos = pos == 0 ? std::string_view::npos : text.rfind("boxed{", pos - 1)) {
    const std::size_t open = pos + 6;
    int depth = 1;
    for (std::size_t i = open; i < text.size(); ++i) {
      if (text[i] == '{') ++depth;
      if (text[i] == '}' && --depth == 0) return non_empty(text.substr(open, i - open));
    }
  }
  for (std::string_view marker : {"final answer is $", "final answer is: $"}) {
    const std::size_t pos = text.rfind(marker);
    if (pos == std::string_view::npos) continue;
    const std::size_t start = pos + marker.size();
    const std::size_t end = text.find('$', start);
    if (end != std::string_view::npos) return non_empty(text.substr(start, end - start));
  }
  return std::nullopt;
}

std::optional<std::string> extract_code(std::string_view text) {
  std::vector<std::size_t> fences;
  for (std::size_t pos = text.find("```"); pos != std::string_view::npos;
       pos = text.find("```", pos + 3)) {
    fences.push_back(pos);
  }
  if (fences.size() < 2) return std::nullopt;
  const std::size_t pairs = fences.size() / 2;
  const std::size_t open = fences[2 * (pairs - 1)] + 3;
  const std::size_t close = fences[2 * (pairs - 1) + 1];
  std::string_view body = text.substr(open, close - open);
  // Language tag runs to the end of the opening line.
  const std::size_t newline = body.find('\n');
  if (newline != std::string_view::npos) {
    body.remove_prefix(newline + 1);
  } else {
    return non_empty(body);
  }
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.remove_suffix(1);
  if (body.empty()) return std::nullopt;
  return std::string(body);
}

std::optional<std::string> extract_solution_tag(std::string_view text) {
  constexpr std::string_view kOpen = "<solution>";
  constexpr std::string_view kClose = "</solution>";
  const std::size_t close = text.rfind(kClose);
  if (close == std::string_view::npos) return std::nullopt;
  const std::size_t open = text.rfind(kOpen, close);
  if (open == std::string_view::npos) return std::nullopt;
  return non_empty(text.substr(open + kOpen.size(), close - open - kOpen.size()));
}

bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty() || s.size() > 18) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

std::optional<Rational> reduce(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  return Rational{num / (g == 0 ? 1 : g), den / (g == 0 ? 1 : g)};
}

std::optional<Rational> parse_decimal(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const std::size_t dot = s.find('.');
  std::string_view whole = dot == std::string_view::npos ? s : s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (dot != std::string_view::npos && whole.empty() && frac.empty()) return std::nullopt;
  if (!whole.empty() && !all_digits(whole)) return std::nullopt;
  if (!frac.empty() && !all_digits(frac)) return std::nullopt;
  if (whole.empty() && dot == std::string_view::npos) return std::nullopt;
  if (whole.size() + frac.size() > 18) return std::nullopt;
  std::string digits = std::string(whole) + std::string(frac);
  if (digits.empty()) return std::nullopt;
  std::int64_t num = 0;
  if (!parse_int(digits, num)) return std::nullopt;
  std::int64_t den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  return reduce(negative ? -num : num, den);
}

std::optional<Rational> parse_rational(std::string_view s) {
  const std::size_t slash = s.find('/');
  if (slash == std::string_view::npos) return parse_decimal(s);
  std::int64_t num = 0;
  std::int64_t den = 0;
  std::string_view a = trim(s.substr(0, slash));
  std::string_view b = trim(s.substr(slash + 1));
  if (!a.empty() && a.front() == '+') a.remove_prefix(1);
  if (!b.empty() && b.front() == '+') b.remove_prefix(1);
  if (!parse_int(a, num) || !parse_int(b, den)) return std::nullopt;
  return reduce(num, den);
}

}  // namespace

std::optional<std::string> extract_answer(std::string_view text, TaskKind kind) {
  switch (kind) {
    case TaskKind::math: return extract_math(text);
    case TaskKind::code: return extract_code(text);
    case TaskKind::knowledge: return extract_solution_tag(text);
  }
  return std::nullopt;
}

std::string canonical_answer(std::string_view answer, TaskKind kind) {
  std::string_view s = trim(answer);
  if (kind == TaskKind::code) return "=" + std::string(s);
  while (s.size() >= 1 && s.front() == '$') s = trim(s.substr(1));
  while (s.size() >= 1 && s.back() == '$') s = trim(s.substr(0, s.size() - 1));
  if (auto r = parse_rational(s)) {
    return "#" + std::to_string(r->num) + "/" + std::to_string(r->den);
  }
  return "=" + std::string(s);
}

bool answers_match(const std::optional<std::string>& answer, std::string_view gold,
                   TaskKind kind) {
  if (!answer) return false;
  return canonical_answer(*answer, kind) == canonical_answer(gold, kind);
}

std::optional<std::string> majority_vote(std::span<const Rollout> rollouts, TaskKind kind) {
  struct Bucket {
    std::size_t count = 0;
    double reward_sum = 0.0;
    std::size_t first_index = 0;
  };
  std::map<std::string, Bucket> buckets;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const auto& answer = rollouts[i].extracted_answer;
    if (!answer) continue;
    auto [it, inserted] = buckets.try_emplace(canonical_answer(*answer, kind));
    if (inserted) it->second.first_index = i;
    it->second.count += 1;
    it->second.reward_sum += rollouts[i].reward.value();
  }
  const Bucket* best = nullptr;
  for (const auto& [key, bucket] : buckets) {
    if (!best || bucket.count > best->count ||
        (bucket.count == best->count &&
         (bucket.reward_sum > best->reward_sum ||
          (bucket.reward_sum == best->reward_sum && bucket.first_index < best->first_index)))) {
      best = &bucket;
    }
  }
  if (!best) return std::nullopt;
  return rollouts[best->first_index].extracted_answer;
}

std::size_t select_by_reward(std::span<const Rollout> rollouts) {
  if (rollouts.empty()) throw InvalidInput("no rollouts to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rollouts.size(); ++i) {
    if (rollouts[i].reward > rollouts[best].reward) best = i;
  }
  return best;
}

ProblemResult ProblemResult::from_rollouts(std::string problem_id, std::string gold_answer,
                                           TaskKind kind, std::vector<Rollout> rollouts) {
  ProblemResult r;
  r.problem_id = std::move(problem_id);
  r.gold_answer = std::move(gold_answer);
  r.task_kind = kind;
  r.rollouts = std::move(rollouts);
  if (!r.rollouts.empty()) {
    r.vote_answer = majority_vote(r.rollouts, kind);
    r.reward_answer = r.rollouts[select_by_reward(r.rollouts)].extracted_answer;
  }
  r.solved_by_vote = answers_match(r.vote_answer, r.gold_answer, kind);
  r.solved_by_reward = answers_match(r.reward_answer, r.gold_answer, kind);
  r.solved_any = r.correct_count() > 0;
  return r;
}

bool ProblemResult::rollout_correct(std::size_t index) const {
  return answers_match(rollouts.at(index).extracted_answer, gold_answer, task_kind);
}

std::size_t ProblemResult::correct_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < rollouts.size(); ++i) n += rollout_correct(i) ? 1 : 0;
  return n;
}

double MetricTable::pass_at_n(int n) const {
  for (const auto& [budget, value] : pass_at) {
    if (budget == n) return value;
  }
  throw InvalidInput("pass@" + std::to_string(n) + " was not computed");
}

std::vector<int> default_pass_budgets(int n) {
  std::vector<int> out;
  for (int b = 1; b < n; b *= 2) out.push_back(b);
  if (n >= 1) out.push_back(n);
  return out;
}

MetricTable compute_metrics(std::span<const ProblemResult> results,
                            std::span<const int> budgets) {
  MetricTable table;
  table.problems = results.size();
  if (results.empty()) {
    for (int b : budgets) table.pass_at.emplace_back(b, 0.0);
    return table;
  }
  table.rollouts_per_problem = results.front().rollouts.size();
  for (const ProblemResult& r : results) {
    if (r.rollouts.size() != table.rollouts_per_problem) {
      throw InvalidInput("ragged rollout counts: problem " + r.problem_id + " has " +
                         std::to_string(r.rollouts.size()) + ", expected " +
                         std::to_string(table.rollouts_per_problem));
    }
  }

  std::vector<std::size_t> first_correct(results.size());
  double vote = 0.0, by_reward = 0.0, precision = 0.0, tokens = 0.0;
  for (std::size_t p = 0; p < results.size(); ++p) {
    const ProblemResult& r = results[p];
    vote += r.solved_by_vote ? 1.0 : 0.0;
    by_reward += r.solved_by_reward ? 1.0 : 0.0;
    std::size_t correct = 0;
    std::int64_t problem_tokens = 0;
    first_correct[p] = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < r.rollouts.size(); ++i) {
      problem_tokens += r.rollouts[i].tokens;
      if (r.rollout_correct(i)) {
        ++correct;
        first_correct[p] = std::min(first_correct[p], i);
      }
    }
    if (!r.rollouts.empty()) {
      precision += static_cast<double>(correct) / static_cast<double>(r.rollouts.size());
    }
    tokens += static_cast<double>(problem_tokens);
  }
  const double n = static_cast<double>(results.size());
  table.accuracy = vote / n;
  table.reward_accuracy = by_reward / n;
  table.precision = precision / n;
  table.avg_gen_tokens = tokens / n;
  for (int b : budgets) {
    if (b < 1) throw InvalidInput("pass@n needs n >= 1");
    double hits = 0.0;
    for (std::size_t first : first_correct) hits += first < static_cast<std::size_t>(b) ? 1.0 : 0.0;
    table.pass_at.emplace_back(b, hits / n);
  }
  return table;
}

double jaccard_solved(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& id : a) common += b.count(id);
  const std::size_t united = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(united);
}

std::vector<std::vector<double>> jaccard_matrix(
    std::span<const std::set<std::string>> solved_sets) {
  const std::size_t n = solved_sets.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      m[i][j] = m[j][i] = jaccard_solved(solved_sets[i], solved_sets[j]);
    }
  }
  return m;
}

}  // namespace des
