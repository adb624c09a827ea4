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

#include "des/moe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "des/errors.hpp"

namespace des::moe {

void MoEConfig::validate() const {
  if (num_experts <= 0 || model_dim <= 0 || ff_dim <= 0 || num_layers <= 0 ||
      vocab_size <= 0 || max_seq_len <= 0) {
    throw InvalidConfig("MoEConfig dimensions must be positive");
  }
  if (default_k < 1 || default_k > num_experts) {
    throw InvalidExpertCount(default_k, num_experts);
  }
}

GatingDecision top_k_route(std::span<const float> router_logits, int k,
                           bool renormalize) {
  const int num_experts = static_cast<int>(router_logits.size());
  if (k < 1 || k > num_experts) throw InvalidExpertCount(k, num_experts);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (float v : router_logits) {
    if (!std::isfinite(v)) throw NumericError("non-finite router logit");
    max_logit = std::max(max_logit, static_cast<double>(v));
  }

  std::vector<double> probs(router_logits.size());
  double total = 0.0;
  for (std::size_t e = 0; e < probs.size(); ++e) {
    probs[e] = std::exp(static_cast<double>(router_logits[e]) - max_logit);
    total += probs[e];
  }
  for (double& p : probs) p /= total;

  std::vector<int> order(router_logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int a, int b) {
                      if (router_logits[a] != router_logits[b]) {
                        return router_logits[a] > router_logits[b];
                      }
                      return a < b;
                    });

  GatingDecision gate;
  gate.expert_indices.assign(order.begin(), order.begin() + k);
  gate.gate_weights.reserve(k);
  double kept = 0.0;
  for (int e : gate.expert_indices) kept += probs[e];
  for (int e : gate.expert_indices) {
    gate.gate_weights.push_back(renormalize ? probs[e] / kept : probs[e]);
  }
  return gate;
}

std::vector<float> Matrix::apply(std::span<const float> x) const {
  std::vector<float> y(rows, 0.0f);
  for (int r = 0; r < rows; ++r) {
    const float* w = data.data() + std::size_t(r) * cols;
    float acc = 0.0f;
    for (int c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] = acc;
  }
  return y;
}

std::vector<float> rms_norm(std::span<const float> x, std::span<const float> gain) {
  float sq = 0.0f;
  for (float v : x) sq += v * v;
  const float scale = 1.0f / std::sqrt(sq / static_cast<float>(x.size()) + 1e-5f);
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * scale * gain[i];
  return out;
}

std::vector<float> expert_ffn(std::span<const float> x, const ExpertWeights& expert) {
  std::vector<float> h = expert.w_in.apply(x);
  for (float& v : h) v = v / (1.0f + std::exp(-v));
  return expert.w_out.apply(h);
}

namespace {

std::vector<float> router_logits(std::span<const float> x, const Matrix& router) {
  std::vector<float> logits(router.cols, 0.0f);
  for (int i = 0; i < router.rows; ++i) {
    const auto row = router.row(i);
    for (int e = 0; e < router.cols; ++e) logits[e] += x[i] * row[e];
  }
  return logits;
}

}  // namespace

std::vector<float> moe_layer_forward(std::span<const float> hidden, int k,
                                     const LayerWeights& layer, bool renormalize,
                                     ForwardStats* stats) {
  const int num_experts = static_cast<int>(layer.experts.size());
  if (k < 1 || k > num_experts) throw InvalidExpertCount(k, num_experts);
  for (float v : hidden) {
    if (!std::isfinite(v)) throw NumericError("non-finite hidden state");
  }

  const std::vector<float> normed = rms_norm(hidden, layer.moe_norm);
  const GatingDecision gate =
      top_k_route(router_logits(normed, layer.router), k, renormalize);

  std::vector<float> out(hidden.begin(), hidden.end());
  for (std::size_t i = 0; i < gate.expert_indices.size(); ++i) {
    const std::vector<float> y = expert_ffn(normed, layer.experts[gate.expert_indices[i]]);
    const float w = static_cast<float>(gate.gate_weights[i]);
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += w * y[d];
  }
  if (stats) {
    stats->moe_calls += 1;
    stats->expert_evaluations += static_cast<std::int64_t>(gate.expert_indices.size());
  }
  return out;
}

namespace {

void check_matrix(const Matrix& m, int rows, int cols, const char* name) {
  if (m.rows != rows || m.cols != cols ||
      m.data.size() != std::size_t(rows) * std::size_t(cols)) {
    throw ValidationError(std::string("tensor ") + name + " has shape " +
                          std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                          ", expected " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
}

void check_vector(const std::vector<float>& v, int size, const char* name) {
  if (v.size() != std::size_t(size)) {
    throw ValidationError(std::string("tensor ") + name + " has length " +
                          std::to_string(v.size()) + ", expected " +
                          std::to_string(size));
  }
}

Matrix random_matrix(int rows, int cols, float scale, Rng& rng) {
  Matrix m(rows, cols);
  std::normal_distribution<float> dist(0.0f, scale);
  for (float& v : m.data) v = dist(rng);
  return m;
}

}  // namespace

ModelWeights::ModelWeights(ModelParameters params) : params_(std::move(params)) {
  const MoEConfig& c = params_.config;
  c.validate();
  const int d = c.model_dim;
  check_matrix(params_.token_embedding, c.vocab_size, d, "token_embedding");
  check_matrix(params_.position_embedding, c.max_seq_len, d, "position_embedding");
  check_matrix(params_.lm_head, c.vocab_size, d, "lm_head");
  check_vector(params_.final_norm, d, "final_norm");
  check_vector(params_.lm_head_bias, c.vocab_size, "lm_head_bias");
  if (params_.layers.size() != std::size_t(c.num_layers)) {
    throw ValidationError("layer count does not match config");
  }
  for (const LayerWeights& layer : params_.layers) {
    check_vector(layer.attn_norm, d, "attn_norm");
    check_vector(layer.moe_norm, d, "moe_norm");
    check_matrix(layer.wq, d, d, "wq");
    check_matrix(layer.wk, d, d, "wk");
    check_matrix(layer.wv, d, d, "wv");
    check_matrix(layer.wo, d, d, "wo");
    check_matrix(layer.router, d, c.num_experts, "router");
    if (layer.experts.size() != std::size_t(c.num_experts)) {
      throw ValidationError("expert count does not match config");
    }
    for (const ExpertWeights& e : layer.experts) {
      check_matrix(e.w_in, c.ff_dim, d, "w_in");
      check_matrix(e.w_out, d, c.ff_dim, "w_out");
    }
  }
}

ModelWeights ModelWeights::random(const MoEConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const int d = config.model_dim;
  const float sd = 1.0f / std::sqrt(static_cast<float>(d));
  const float sf = 1.0f / std::sqrt(static_cast<float>(config.ff_dim));

  ModelParameters p;
  p.config = config;
  p.token_embedding = random_matrix(config.vocab_size, d, 1.0f, rng);
  p.position_embedding = random_matrix(config.max_seq_len, d, 0.1f, rng);
  for (int l = 0; l < config.num_layers; ++l) {
    LayerWeights layer;
    layer.attn_norm.assign(d, 1.0f);
    layer.moe_norm.assign(d, 1.0f);
    layer.wq = random_matrix(d, d, sd, rng);
    layer.wk = random_matrix(d, d, sd, rng);
    layer.wv = random_matrix(d, d, sd, rng);
    layer.wo = random_matrix(d, d, sd, rng);
    layer.router = random_matrix(d, config.num_experts, sd, rng);
    for (int e = 0; e < config.num_experts; ++e) {
      layer.experts.push_back(ExpertWeights{random_matrix(config.ff_dim, d, sd, rng),
                                            random_matrix(d, config.ff_dim, sf, rng)});
    }
    p.layers.push_back(std::move(layer));
  }
  p.final_norm.assign(d, 1.0f);
  p.lm_head = random_matrix(config.vocab_size, d, sd, rng);
  p.lm_head_bias.assign(config.vocab_size, 0.0f);
  return ModelWeights(std::move(p));
}

DecodeSession::DecodeSession(const ModelWeights& weights, int k, ForwardStats* stats)
    : weights_(&weights), k_(k), stats_(stats) {
  const MoEConfig& c = weights.config();
  if (k < 1 || k > c.num_experts) throw InvalidExpertCount(k, c.num_experts);
  keys_.resize(c.num_layers);
  values_.resize(c.num_layers);
}

std::vector<float> DecodeSession::push(int token) {
  const ModelParameters& p = weights_->params();
  const MoEConfig& c = p.config;
  if (length_ + 1 > std::size_t(c.max_seq_len)) {
    throw ContextOverflow(length_ + 1, c.max_seq_len);
  }
  if (token < 0 || token >= c.vocab_size) {
    throw InvalidInput("token id " + std::to_string(token) + " outside vocabulary");
  }
  const int d = c.model_dim;
  const auto tok = p.token_embedding.row(token);
  const auto pos = p.position_embedding.row(static_cast<int>(length_));
  std::vector<float> x(d);
  for (int i = 0; i < d; ++i) x[i] = tok[i] + pos[i];

  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));
  for (int l = 0; l < c.num_layers; ++l) {
    const LayerWeights& layer = p.layers[l];
    const std::vector<float> h = rms_norm(x, layer.attn_norm);
    const std::vector<float> q = layer.wq.apply(h);
    const std::vector<float> key = layer.wk.apply(h);
    const std::vector<float> val = layer.wv.apply(h);
    keys_[l].insert(keys_[l].end(), key.begin(), key.end());
    values_[l].insert(values_[l].end(), val.begin(), val.end());

    const std::size_t n = length_ + 1;
    std::vector<float> scores(n);
    float max_score = -std::numeric_limits<float>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const float* kj = keys_[l].data() + j * d;
      float s = 0.0f;
      for (int i = 0; i < d; ++i) s += q[i] * kj[i];
      scores[j] = s * inv_sqrt_d;
      max_score = std::max(max_score, scores[j]);
    }
    float denom = 0.0f;
    for (float& s : scores) {
      s = std::exp(s - max_score);
      denom += s;
    }
    std::vector<float> attended(d, 0.0f);
    for (std::size_t j = 0; j < n; ++j) {
      const float a = scores[j] / denom;
      const float* vj = values_[l].data() + j * d;
      for (int i = 0; i < d; ++i) attended[i] += a * vj[i];
    }
    const std::vector<float> o = layer.wo.apply(attended);
    for (int i = 0; i < d; ++i) x[i] += o[i];

    x = moe_layer_forward(x, k_, layer, c.renormalize_gates, stats_);
  }
  ++length_;
  std::vector<float> logits = p.lm_head.apply(rms_norm(x, p.final_norm));
  for (int v = 0; v < c.vocab_size; ++v) logits[v] += p.lm_head_bias[v];
  return logits;
}

Logits lm_forward(std::span<const int> tokens, int k, const ModelWeights& weights,
                  ForwardStats* stats) {
  const MoEConfig& c = weights.config();
  if (tokens.size() > std::size_t(c.max_seq_len)) {
    throw ContextOverflow(tokens.size(), c.max_seq_len);
  }
  DecodeSession session(weights, k, stats);
  Logits out;
  out.rows = static_cast<int>(tokens.size());
  out.cols = c.vocab_size;
  out.data.reserve(tokens.size() * std::size_t(c.vocab_size));
  for (int t : tokens) {
    const std::vector<float> row = session.push(t);
    out.data.insert(out.data.end(), row.begin(), row.end());
  }
  return out;
}

int sample_token(std::span<const float> logits, double temperature, Rng& rng) {
  if (!(temperature >= 0.0)) throw InvalidInput("temperature must be >= 0");
  if (logits.empty()) throw DegenerateDistribution("empty logit vector");
  const double u = uniform01(rng);

  double max_logit = -std::numeric_limits<double>::infinity();
  int argmax = -1;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (std::isnan(logits[i])) throw NumericError("NaN logit");
    if (logits[i] > max_logit) {
      max_logit = logits[i];
      argmax = static_cast<int>(i);
    }
  }
  if (argmax < 0) throw DegenerateDistribution("all logits are -inf");
  if (std::isinf(max_logit)) return argmax;  // +inf dominates
  if (temperature == 0.0) return argmax;

  std::vector<double> weights(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    weights[i] = std::exp((static_cast<double>(logits[i]) - max_logit) / temperature);
    total += weights[i];
  }
  double target = u * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target < 0.0) return static_cast<int>(i);
  }
  // Rounding left a sliver; fall back to the last token with mass.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return static_cast<int>(i);
  }
  return argmax;
}

}  // namespace des::moe
