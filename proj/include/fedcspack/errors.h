// Copyright 2026 The fedcspack Authors. All Rights Reserved.
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
// =============================================================================

#ifndef FEDCSPACK_ERRORS_H_
#define FEDCSPACK_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedcspack {

// Dimension or length disagreement between two objects that must agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite value produced during training.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t layer)
      : std::runtime_error(what), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

// Malformed IDX input. `offset` is the byte position where parsing failed.
class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& what, std::string path, std::size_t offset)
      : std::runtime_error(what), path_(std::move(path)), offset_(offset) {}
  const std::string& path() const { return path_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string path_;
  std::size_t offset_;
};

// Malformed wire frame.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Invalid or infeasible experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Partitioning cannot satisfy the request with the rows available.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A client update that breaks mask/payload consistency.
class ProtocolViolation : public std::runtime_error {
 public:
  ProtocolViolation(const std::string& what, int client_id)
      : std::runtime_error(what), client_id_(client_id) {}
  int client_id() const { return client_id_; }

 private:
  int client_id_;
};

// Wraps any failure inside a simulation with the round and client involved.
// client_id is -1 for server-side failures.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, std::size_t round, int client_id)
      : std::runtime_error(what), round_(round), client_id_(client_id) {}
  std::size_t round() const { return round_; }
  int client_id() const { return client_id_; }

 private:
  std::size_t round_;
  int client_id_;
};

}  // namespace fedcspack

#endif  // FEDCSPACK_ERRORS_H_
