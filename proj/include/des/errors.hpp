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

#include <stdexcept>
#include <string>

namespace des {

// Root of every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidExpertCount : public Error {
 public:
  InvalidExpertCount(int k, int num_experts);
  int k() const { return k_; }

 private:
  int k_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ContextOverflow : public Error {
 public:
  ContextOverflow(std::size_t length, std::size_t max_length);
};

class DegenerateDistribution : public Error {
 public:
  using Error::Error;
};

class AlreadyTerminated : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Transport failure after the retry budget is spent.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, int status, int retries);
  int status() const { return status_; }
  int retries() const { return retries_; }

 private:
  int status_;
  int retries_;
};

// The peer answered, but not in the agreed shape.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace des
