// Copyright 2026 The Cascadion Authors.
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

#ifndef CASCADION_COMMON_H_
#define CASCADION_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cascadion {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor shapes do not conform to the arity/shape rule of an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file contents (checkpoints, JSONL data).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// 64-bit FNV-1a; used for content-addressed stage directories.
std::uint64_t fnv1a64(const std::string& bytes);

std::string hex64(std::uint64_t value);

}  // namespace cascadion

#endif  // CASCADION_COMMON_H_
