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

#ifndef CASCADION_TESTS_TEST_SUPPORT_H_
#define CASCADION_TESTS_TEST_SUPPORT_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cascadion/model.h"
#include "cascadion/vocabulary.h"

namespace cascadion::testing {

/// Vocabulary of `total` ids: the reserved prefix plus content tokens p0, p1, ...
inline Vocabulary small_vocab(int total, const std::string& prefix = "t") {
  std::vector<std::string> content;
  for (int i = 0; i < total - Vocabulary::kNumReserved; ++i) content.push_back(prefix + std::to_string(i));
  return Vocabulary(content);
}

inline SeqModel random_asr(const Vocabulary& v, int d, int d_feat, std::uint64_t seed) {
  return init_params({ModelKind::kAsr, std::nullopt, v, d, d_feat}, seed);
}

inline SeqModel random_mt(const Vocabulary& src, const Vocabulary& tgt, int d, std::uint64_t seed) {
  return init_params({ModelKind::kMt, src, tgt, d, std::nullopt}, seed);
}

/// Scales every parameter so random models have peaked, varied distributions.
inline SeqModel scaled(SeqModel m, double factor) {
  for (auto& t : m.mutable_tensors()) {
    for (double& v : t.values()) v *= factor;
  }
  return m;
}

inline AcousticSequence random_frames(std::size_t frames, int d_feat, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t({frames, static_cast<std::size_t>(d_feat)});
  for (double& v : t.values()) v = normal(rng);
  return {t};
}

/// Content ids drawn uniformly from the non-reserved range.
inline std::vector<int> random_tokens(std::size_t length, int vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(Vocabulary::kNumReserved, vocab - 1);
  std::vector<int> out(length);
  for (int& t : out) t = pick(rng);
  return out;
}

}  // namespace cascadion::testing

#endif  // CASCADION_TESTS_TEST_SUPPORT_H_
