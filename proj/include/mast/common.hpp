// Copyright 2026 The mast-cpp Authors. All Rights Reserved.
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

#ifndef MAST_COMMON_HPP_
#define MAST_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mast {

// Dense row-major extents. All extents are positive.
using Shape = std::vector<int>;

// Invalid argument to an operation (bad shapes aside).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor extents do not satisfy an op precondition.
class ShapeError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// Bad model or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data (files, manifests, labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem / serialization failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or other numeric breakdown at runtime.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched parameter trees or checkpoint contents.
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The gradient-check oracle itself could not run (e.g. non-deterministic f).
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace mast

#endif  // MAST_COMMON_HPP_
