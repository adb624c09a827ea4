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

// Naive reference implementations used as test oracles. They share no code
// with the library beyond the parameter structs.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "des/moe.hpp"

namespace oracle {

// Full softmax, stable sort of indices by logit, keep k, renormalize.
inline void route(std::span<const float> logits, int k, std::vector<int>& indices,
                  std::vector<double>& weights) {
  const std::size_t e = logits.size();
  std::vector<long double> p(e);
  long double mx = logits[0];
  for (float v : logits) mx = std::max<long double>(mx, v);
  long double z = 0;
  for (std::size_t i = 0; i < e; ++i) {
    p[i] = std::exp(static_cast<long double>(logits[i]) - mx);
    z += p[i];
  }
  std::vector<int> order(e);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logits[a] > logits[b]; });
  indices.assign(order.begin(), order.begin() + k);
  long double kept = 0;
  for (int i : indices) kept += p[i] / z;
  weights.clear();
  for (int i : indices) weights.push_back(static_cast<double>(p[i] / z / kept));
}

inline std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> p(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += std::exp(static_cast<double>(logits[i]));
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(static_cast<double>(logits[i])) / z;
  return p;
}

inline std::vector<double> matvec(const des::moe::Matrix& m, const std::vector<double>& x) {
  std::vector<double> y(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) y[r] += static_cast<double>(m.data[r * m.cols + c]) * x[c];
  }
  return y;
}

// Evaluates every expert, then masks the mixture to the top k.
inline std::vector<double> dense_masked_moe(std::span<const float> hidden, int k,
                                            const des::moe::LayerWeights& layer) {
  const std::size_t d = hidden.size();
  double sq = 0;
  for (float v : hidden) sq += static_cast<double>(v) * v;
  const double scale = 1.0 / std::sqrt(sq / static_cast<double>(d) + 1e-5);
  std::vector<double> normed(d);
  for (std::size_t i = 0; i < d; ++i) normed[i] = hidden[i] * scale * layer.moe_norm[i];

  const int e = static_cast<int>(layer.experts.size());
  std::vector<float> logits(e, 0.0f);
  for (int j = 0; j < e; ++j) {
    double acc = 0;
    for (std::size_t i = 0; i < d; ++i) {
      acc += normed[i] * static_cast<double>(layer.router.data[i * e + j]);
    }
    logits[j] = static_cast<float>(acc);
  }
  const std::vector<double> p = softmax(logits);
  std::vector<int> order(e);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logits[a] > logits[b]; });
  std::vector<double> mask(e, 0.0);
  double kept = 0;
  for (int i = 0; i < k; ++i) kept += p[order[i]];
  for (int i = 0; i < k; ++i) mask[order[i]] = p[order[i]] / kept;

  std::vector<double> out(hidden.begin(), hidden.end());
  for (int j = 0; j < e; ++j) {
    std::vector<double> h = matvec(layer.experts[j].w_in, normed);
    for (double& v : h) v = v / (1.0 + std::exp(-v));
    const std::vector<double> y = matvec(layer.experts[j].w_out, h);
    for (std::size_t i = 0; i < d; ++i) out[i] += mask[j] * y[i];
  }
  return out;
}

}  // namespace oracle
