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

#ifndef CASCADION_VOCABULARY_H_
#define CASCADION_VOCABULARY_H_

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cascadion {

/// Ordered token inventory with reserved ids 0..3.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumReserved = 4;

  /// Empty placeholder; not usable for encoding.
  Vocabulary() = default;
  /// Prepends the reserved tokens to `content`.
  explicit Vocabulary(const std::vector<std::string>& content);

  /// Full token list including the reserved prefix, as stored in checkpoints.
  static Vocabulary from_full_list(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  /// Unknown strings map to kUnk.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  static bool is_special(int id) { return id < kNumReserved; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace cascadion

#endif  // CASCADION_VOCABULARY_H_
