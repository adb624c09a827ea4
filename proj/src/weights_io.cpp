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

// Weights file: "DESW" magic, u32 version, u64 header length, a JSON header
// naming every tensor (shape, dtype=float32, byte offset), then the raw
// little-endian float32 payload.

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "des/errors.hpp"
#include "des/moe.hpp"
#include "json.hpp"

namespace des::moe {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'D', 'E', 'S', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ValidationError("weights file truncated");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

json config_to_json(const MoEConfig& c) {
  return json{{"num_experts", c.num_experts}, {"default_k", c.default_k},
              {"model_dim", c.model_dim},     {"ff_dim", c.ff_dim},
              {"num_layers", c.num_layers},   {"vocab_size", c.vocab_size},
              {"max_seq_len", c.max_seq_len}, {"renormalize_gates", c.renormalize_gates}};
}

MoEConfig config_from_json(const json& j) {
  MoEConfig c;
  c.num_experts = j.at("num_experts").get<int>();
  c.default_k = j.at("default_k").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.renormalize_gates = j.value("renormalize_gates", true);
  return c;
}

// Visits every tensor in a fixed order with a stable name.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  fn("token_embedding", p.token_embedding);
  fn("position_embedding", p.position_embedding);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const std::string prefix = "layers." + std::to_string(l) + ".";
    fn(prefix + "attn_norm", layer.attn_norm);
    fn(prefix + "wq", layer.wq);
    fn(prefix + "wk", layer.wk);
    fn(prefix + "wv", layer.wv);
    fn(prefix + "wo", layer.wo);
    fn(prefix + "moe_norm", layer.moe_norm);
    fn(prefix + "router", layer.router);
    for (std::size_t e = 0; e < layer.experts.size(); ++e) {
      const std::string ep = prefix + "experts." + std::to_string(e) + ".";
      fn(ep + "w_in", layer.experts[e].w_in);
      fn(ep + "w_out", layer.experts[e].w_out);
    }
  }
  fn("final_norm", p.final_norm);
  fn("lm_head", p.lm_head);
  fn("lm_head_bias", p.lm_head_bias);
}

std::vector<std::int64_t> shape_of(const Matrix& m) { return {m.rows, m.cols}; }
std::vector<std::int64_t> shape_of(const std::vector<float>& v) {
  return {static_cast<std::int64_t>(v.size())};
}
std::vector<float>& storage(Matrix& m) { return m.data; }
std::vector<float>& storage(std::vector<float>& v) { return v; }
const std::vector<float>& storage(const Matrix& m) { return m.data; }
const std::vector<float>& storage(const std::vector<float>& v) { return v; }

}  // namespace

void ModelWeights::save(const std::filesystem::path& path) const {
  json tensors = json::array();
  std::uint64_t offset = 0;
  for_each_tensor(params_, [&](const std::string& name, const auto& t) {
    const std::uint64_t bytes = storage(t).size() * sizeof(float);
    tensors.push_back({{"name", name},
                       {"shape", shape_of(t)},
                       {"dtype", "float32"},
                       {"offset", offset},
                       {"bytes", bytes}});
    offset += bytes;
  });
  const json header{{"format", "des-weights"},
                    {"byte_order", "little"},
                    {"config", config_to_json(params_.config)},
                    {"tensors", tensors}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for_each_tensor(params_, [&](const std::string&, const auto& t) {
    for (float v : storage(t)) write_le<float>(out, v);
  });
  if (!out) throw Error("failed writing " + path.string());
}

ModelWeights ModelWeights::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError(path.string() + " is not a weights file");
  }
  if (read_le<std::uint32_t>(in) != kVersion) {
    throw ValidationError("unsupported weights file version");
  }
  const auto header_len = read_le<std::uint64_t>(in);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw ValidationError("weights header truncated");
  }
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("weights header: ") + e.what());
  }

  ModelParameters p;
  p.config = config_from_json(header.at("config"));
  p.config.validate();
  p.layers.resize(p.config.num_layers);
  for (auto& layer : p.layers) layer.experts.resize(p.config.num_experts);

  const json& tensors = header.at("tensors");
  std::size_t index = 0;
  const auto data_start = in.tellg();
  for_each_tensor(p, [&](const std::string& name, auto& t) {
    if (index >= tensors.size()) throw ValidationError("missing tensor " + name);
    const json& entry = tensors[index++];
    if (entry.at("name").get<std::string>() != name) {
      throw ValidationError("unexpected tensor " + entry.at("name").get<std::string>() +
                            ", wanted " + name);
    }
    if (entry.at("dtype").get<std::string>() != "float32") {
      throw ValidationError("tensor " + name + " is not float32");
    }
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    std::int64_t count = 1;
    for (auto s : shape) {
      if (s < 0) throw ValidationError("negative dimension in " + name);
      count *= s;
    }
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Matrix>) {
      if (shape.size() != 2) throw ValidationError(name + " must be rank 2");
      t.rows = static_cast<int>(shape[0]);
      t.cols = static_cast<int>(shape[1]);
    } else if (shape.size() != 1) {
      throw ValidationError(name + " must be rank 1");
    }
    auto& buf = storage(t);
    buf.resize(static_cast<std::size_t>(count));
    in.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    for (float& v : buf) v = read_le<float>(in);
  });
  if (index != tensors.size()) throw ValidationError("unexpected extra tensors");
  return ModelWeights(std::move(p));
}

}  // namespace des::moe
