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

// A tiny decoder-only transformer whose feed-forward blocks are mixture-of-
// experts layers. The number of activated experts is an argument of every
// forward call rather than a property of the weights.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "des/seed.hpp"

namespace des::moe {

struct MoEConfig {
  int num_experts = 8;
  int default_k = 2;
  int model_dim = 64;
  int ff_dim = 128;
  int num_layers = 2;
  int vocab_size = 258;
  int max_seq_len = 512;
  // false keeps the raw softmax mass of the selected experts (sums below 1).
  bool renormalize_gates = true;

  void validate() const;
  bool operator==(const MoEConfig&) const = default;
};

struct GatingDecision {
  std::vector<int> expert_indices;    // descending logit, ties by lower index
  std::vector<double> gate_weights;   // aligned with expert_indices
};

// Softmax over all logits, keep the k largest, renormalize over the kept set.
GatingDecision top_k_route(std::span<const float> router_logits, int k,
                           bool renormalize = true);

// Dense row-major matrix; y = W x maps cols -> rows.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0f) {}

  std::span<const float> row(int r) const {
    return {data.data() + std::size_t(r) * cols, std::size_t(cols)};
  }
  std::span<float> row(int r) {
    return {data.data() + std::size_t(r) * cols, std::size_t(cols)};
  }
  std::vector<float> apply(std::span<const float> x) const;
};

struct ExpertWeights {
  Matrix w_in;   // ff_dim x model_dim
  Matrix w_out;  // model_dim x ff_dim
};

struct LayerWeights {
  std::vector<float> attn_norm;
  Matrix wq, wk, wv, wo;  // model_dim x model_dim
  std::vector<float> moe_norm;
  Matrix router;  // model_dim x num_experts; logit_e = sum_i h_i * router[i][e]
  std::vector<ExpertWeights> experts;
};

struct ModelParameters {
  MoEConfig config;
  Matrix token_embedding;     // vocab_size x model_dim
  Matrix position_embedding;  // max_seq_len x model_dim
  std::vector<LayerWeights> layers;
  std::vector<float> final_norm;
  Matrix lm_head;  // vocab_size x model_dim
  std::vector<float> lm_head_bias;  // vocab_size
};

// Counts MoE work; expert_evaluations == k * moe_calls for every forward.
struct ForwardStats {
  std::int64_t moe_calls = 0;
  std::int64_t expert_evaluations = 0;
};

std::vector<float> rms_norm(std::span<const float> x, std::span<const float> gain);

// One expert FFN: w_out * silu(w_in * x).
std::vector<float> expert_ffn(std::span<const float> x, const ExpertWeights& expert);

// hidden + sum_i gate_i * FFN_i(norm(hidden)), routed on norm(hidden).
std::vector<float> moe_layer_forward(std::span<const float> hidden, int k,
                                     const LayerWeights& layer,
                                     bool renormalize = true,
                                     ForwardStats* stats = nullptr);

// Immutable, shape-checked parameter set. Share by const reference or
// shared_ptr<const ModelWeights> across threads.
class ModelWeights {
 public:
  explicit ModelWeights(ModelParameters params);

  static ModelWeights random(const MoEConfig& config, std::uint64_t seed);
  static ModelWeights load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const MoEConfig& config() const { return params_.config; }
  const ModelParameters& params() const { return params_; }

 private:
  ModelParameters params_;
};

struct Logits {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  std::span<const float> row(int r) const {
    return {data.data() + std::size_t(r) * cols, std::size_t(cols)};
  }
};

// Incremental decoding with a per-layer key/value cache. Produces exactly the
// rows lm_forward would for the same prefix.
class DecodeSession {
 public:
  DecodeSession(const ModelWeights& weights, int k, ForwardStats* stats = nullptr);

  std::vector<float> push(int token);
  std::size_t length() const { return length_; }

 private:
  const ModelWeights* weights_;
  int k_;
  ForwardStats* stats_;
  std::size_t length_ = 0;
  std::vector<std::vector<float>> keys_;    // per layer, length x model_dim
  std::vector<std::vector<float>> values_;  // per layer, length x model_dim
};

// Logits for every position. Pure in (tokens, k, weights).
Logits lm_forward(std::span<const int> tokens, int k, const ModelWeights& weights,
                  ForwardStats* stats = nullptr);

// temperature 0 is argmax. Always consumes exactly one engine draw.
int sample_token(std::span<const float> logits, double temperature, Rng& rng);

}  // namespace des::moe
