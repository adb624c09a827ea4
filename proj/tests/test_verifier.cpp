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

#include <doctest.h>

#include <cmath>

#include "des/errors.hpp"
#include "des/verifier.hpp"

using namespace des;

namespace {

Problem labeled_problem(const std::string& id = "v1") {
  Problem p;
  p.id = id;
  p.prompt = "Q";
  p.gold_answer = "7";
  p.profile = EffectiveKProfile{{4}, 0.9, 0.1, 3};
  return p;
}

State labeled_state(const Problem& p, std::vector<bool> labels, const std::string& tag = "") {
  State s = State::initial(p, 4, 10);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Step step;
    step.text = "## Step " + std::to_string(i + 1) + ": " + tag + ".\n";
    step.token_count = 5;
    step.correct = labels[i];
    s = s.extend(step, 4);
  }
  return s;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(clamp(a) > clamp(b)) with a = f + (1-f) u1 + N(0, s^2), b = (1-f) u2 + N(0, s^2),
// by midpoint quadrature. clamp(a) > clamp(b) iff a > b, a > 0 and b < 1.
double outscore_probability(double f, double s) {
  const int nu = 60, na = 2000;
  const double lo = -6 * s, hi = 1 + 6 * s;
  double total = 0;
  for (int i = 0; i < nu; ++i) {
    const double mu_a = f + (1 - f) * (i + 0.5) / nu;
    for (int j = 0; j < nu; ++j) {
      const double mu_b = (1 - f) * (j + 0.5) / nu;
      double inner = 0;
      const double da = (hi - lo) / na;
      for (int t = 0; t < na; ++t) {
        const double a = lo + (t + 0.5) * da;
        if (a <= 0) continue;
        const double pdf = std::exp(-0.5 * std::pow((a - mu_a) / s, 2)) / (s * std::sqrt(2 * M_PI));
        inner += pdf * normal_cdf((std::min(a, 1.0) - mu_b) / s) * da;
      }
      total += inner;
    }
  }
  return total / (nu * nu);
}

}  // namespace

TEST_SUITE("verifier") {

TEST_CASE("reward range") {
  CHECK(Reward(0.25).value() == 0.25);
  CHECK_THROWS_AS(Reward(1.5), InvalidInput);
  CHECK_THROWS_AS(Reward(-0.1), InvalidInput);
  CHECK(Reward::clamped(1.2).value() == 1.0);
  CHECK(Reward::clamped(-3.0).value() == 0.0);
}

TEST_CASE("aggregation modes") {
  const std::vector<double> s{0.9, 0.8, 0.7};
  CHECK(aggregate_step_scores(s, AggregationMode::last).value() == doctest::Approx(0.7));
  CHECK(aggregate_step_scores(s, AggregationMode::min).value() == doctest::Approx(0.7));
  CHECK(aggregate_step_scores(s, AggregationMode::product).value() == doctest::Approx(0.504));
  CHECK_THROWS_AS(aggregate_step_scores(std::vector<double>{}, AggregationMode::last),
                  InvalidInput);
  CHECK(parse_aggregation_mode("min") == AggregationMode::min);
}

TEST_CASE("aggregation bounds on random scores") {
  Rng rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(1 + rng() % 6);
    for (double& v : s) v = uniform01(rng);
    const double mn = aggregate_step_scores(s, AggregationMode::min).value();
    const double prod = aggregate_step_scores(s, AggregationMode::product).value();
    for (double v : s) CHECK(mn <= v);
    CHECK(prod <= mn + 1e-12);
  }
}

TEST_CASE("constant verifier") {
  const Problem p = labeled_problem();
  const ConstantVerifier v;
  CHECK(v.score(p, labeled_state(p, {true})).value() == 0.5);
  CHECK(v.score(p, labeled_state(p, {false, true})).value() == 0.5);
}

TEST_CASE("perfect oracle scores correctness exactly") {
  const Problem p = labeled_problem();
  const OracleVerifier v;
  CHECK(v.score(p, labeled_state(p, {true, true})).value() == 1.0);
  CHECK(v.score(p, labeled_state(p, {true, false})).value() == 0.0);
  CHECK(v.score(p, labeled_state(p, {false, true})).value() == 0.0);
  CHECK_THROWS_AS(v.score(p, State::initial(p, 4, 10)), InvalidInput);
}

TEST_CASE("perfect oracle ranks every pair like the ground truth") {
  const Problem p = labeled_problem();
  const OracleVerifier v;
  std::vector<State> states;
  std::vector<bool> truth;
  for (int mask = 0; mask < 16; ++mask) {
    std::vector<bool> labels;
    for (int b = 0; b < 4; ++b) labels.push_back((mask >> b) & 1);
    states.push_back(labeled_state(p, labels));
    truth.push_back(mask == 15);
  }
  for (std::size_t a = 0; a < states.size(); ++a) {
    for (std::size_t b = 0; b < states.size(); ++b) {
      const double ra = v.score(p, states[a]).value(), rb = v.score(p, states[b]).value();
      CHECK((ra > rb) == (truth[a] && !truth[b]));
    }
  }
}

TEST_CASE("oracle falls back to the extracted answer for unlabeled steps") {
  const Problem p = labeled_problem();
  const OracleVerifier v;
  const State right = State::initial(p, 4, 10).extend(Step{"so $\\boxed{7}$", 3, true, 0, {}}, 4);
  const State wrong = State::initial(p, 4, 10).extend(Step{"so $\\boxed{8}$", 3, true, 0, {}}, 4);
  CHECK(v.score(p, right).value() == 1.0);
  CHECK(v.score(p, wrong).value() == 0.0);
}

TEST_CASE("noisy oracle is deterministic per state and in range") {
  const Problem p = labeled_problem();
  const OracleVerifier v(OracleVerifierConfig{0.7, 0.4, 3});
  const State s = labeled_state(p, {true, false}, "x");
  CHECK(v.score(p, s) == v.score(p, s));
  const OracleVerifier other(OracleVerifierConfig{0.7, 0.4, 4});
  int different = 0;
  for (int i = 0; i < 20; ++i) {
    const State t = labeled_state(p, {true}, std::to_string(i));
    const double r = v.score(p, t).value();
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    different += r != other.score(p, t).value() ? 1 : 0;
  }
  CHECK(different > 10);
  CHECK(v.name() == "noisy");
  CHECK(OracleVerifier().name() == "oracle");
}

TEST_CASE("noisy oracle pairwise ordering matches the mixing rule") {
  const double fidelity = 0.7, sigma = 0.25;
  const double expected = outscore_probability(fidelity, sigma);
  const OracleVerifier v(OracleVerifierConfig{fidelity, sigma, 77});
  int wins = 0;
  const int pairs = 10000;
  for (int i = 0; i < pairs; ++i) {
    const Problem p = labeled_problem("pair-" + std::to_string(i));
    const double good = v.score(p, labeled_state(p, {true, true}, "g")).value();
    const double bad = v.score(p, labeled_state(p, {true, false}, "b")).value();
    wins += good > bad ? 1 : 0;
  }
  const double band = 4.0 * std::sqrt(expected * (1 - expected) / pairs);
  MESSAGE("expected " << expected << ", observed " << static_cast<double>(wins) / pairs);
  CHECK(static_cast<double>(wins) / pairs >= expected - band);
  CHECK(static_cast<double>(wins) / pairs <= expected + band);
  // Without noise the fidelity term alone separates the classes.
  const OracleVerifier clean(OracleVerifierConfig{fidelity, 0.0, 77});
  const Problem p = labeled_problem();
  CHECK(clean.score(p, labeled_state(p, {true}, "g")) > clean.score(p, labeled_state(p, {false}, "b")));
}

}
