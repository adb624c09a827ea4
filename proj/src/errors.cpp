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

#include "des/errors.hpp"

namespace des {

InvalidExpertCount::InvalidExpertCount(int k, int num_experts)
    : Error("expert count " + std::to_string(k) + " outside [1, " +
            std::to_string(num_experts) + "]"),
      k_(k) {}

ContextOverflow::ContextOverflow(std::size_t length, std::size_t max_length)
    : Error("sequence length " + std::to_string(length) +
            " exceeds max_seq_len " + std::to_string(max_length)) {}

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

BackendError::BackendError(const std::string& what, int status, int retries)
    : Error(what + " (status " + std::to_string(status) + ", retries " +
            std::to_string(retries) + ")"),
      status_(status),
      retries_(retries) {}

}  // namespace des
