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

#include "cascadion/vocabulary.h"

#include "cascadion/common.h"

namespace cascadion {

namespace {
const char* const kReserved[Vocabulary::kNumReserved] = {"<pad>", "<s>", "</s>", "<unk>"};
}

Vocabulary::Vocabulary(const std::vector<std::string>& content) {
  tokens_.assign(std::begin(kReserved), std::end(kReserved));
  tokens_.insert(tokens_.end(), content.begin(), content.end());
  index();
}

Vocabulary Vocabulary::from_full_list(const std::vector<std::string>& tokens) {
  if (tokens.size() < static_cast<std::size_t>(kNumReserved) + 1) {
    throw FormatError("vocabulary: need at least 5 tokens, got " + std::to_string(tokens.size()));
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens[i] != kReserved[i]) {
      throw FormatError("vocabulary: reserved id " + std::to_string(i) + " must be " +
                        kReserved[i] + ", found " + tokens[i]);
    }
  }
  return Vocabulary(std::vector<std::string>(tokens.begin() + kNumReserved, tokens.end()));
}

void Vocabulary::index() {
  if (tokens_.size() < static_cast<std::size_t>(kNumReserved) + 1) {
    throw Error("vocabulary: size must be at least 5");
  }
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw Error("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw Error("vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(std::string(token)) > 0;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

}  // namespace cascadion
