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

#include <algorithm>

#include "des/errors.hpp"
#include "des/policy.hpp"

namespace des {

std::vector<int> ByteTokenizer::encode(const std::string& text) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(kByteOffset + c);
  return ids;
}

char ByteTokenizer::decode(int token) {
  return static_cast<char>(static_cast<unsigned char>(token - kByteOffset));
}

ToyMoePolicy::ToyMoePolicy(std::shared_ptr<const moe::ModelWeights> weights)
    : weights_(std::move(weights)) {
  if (!weights_) throw InvalidConfig("toy policy needs weights");
  if (weights_->config().vocab_size < ByteTokenizer::kVocabSize) {
    throw InvalidConfig("toy policy needs vocab_size >= 258");
  }
}

Step ToyMoePolicy::sample_step(const Problem&, const State& state, int k,
                               const DecodeParams& decode, Rng& rng) const {
  check_request(state, k);
  const moe::MoEConfig& config = weights_->config();
  const int budget = std::clamp(decode.max_step_tokens, 1, config.max_seq_len - 1);

  // Keep the most recent context that still leaves room for the step.
  std::vector<int> context = ByteTokenizer::encode(state.full_text());
  const std::size_t window = static_cast<std::size_t>(config.max_seq_len - budget - 1);
  if (context.size() > window) {
    context.erase(context.begin(), context.end() - static_cast<std::ptrdiff_t>(window));
  }
  context.insert(context.begin(), ByteTokenizer::kBos);

  moe::DecodeSession session(*weights_, k);
  std::vector<float> logits;
  for (int t : context) logits = session.push(t);

  const double temperature = decode.temperature_for(k);
  Step step;
  while (step.token_count < budget) {
    const int token = moe::sample_token(logits, temperature, rng);
    if (token == ByteTokenizer::kEos) {
      step.is_terminal = true;
      break;
    }
    if (token < ByteTokenizer::kByteOffset) {  // stray BOS
      logits = session.push(token);
      ++step.token_count;
      continue;
    }
    step.text.push_back(ByteTokenizer::decode(token));
    ++step.token_count;

    bool stop = false;
    for (const std::string& delim : decode.delimiters) {
      if (step.text.size() >= delim.size() &&
          step.text.compare(step.text.size() - delim.size(), delim.size(), delim) == 0) {
        step.text.resize(step.text.size() - delim.size());
        stop = true;
        break;
      }
    }
    if (stop || step.token_count >= budget) break;
    logits = session.push(token);
  }
  return step;
}

}  // namespace des
