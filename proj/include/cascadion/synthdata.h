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

#ifndef CASCADION_SYNTHDATA_H_
#define CASCADION_SYNTHDATA_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cascadion/model.h"
#include "cascadion/vocabulary.h"

namespace cascadion {

enum class Domain { kIn, kOut };

std::string_view to_string(Domain domain);
Domain domain_from_string(std::string_view name);

/// Synthetic triplet task. Token indices below are content indices
/// (vocabulary id minus the reserved prefix).
struct TaskSpec {
  int transcript_vocab = 20;
  int translation_vocab = 20;
  /// Transcript token pairs that share one acoustic class.
  std::vector<std::pair<int, int>> homophone_pairs = {{0, 1}, {2, 3}, {4, 5}};
  /// Fraction of sentences containing at least one homophone token.
  double homophone_rate = 0.3;
  /// Probability that a homophone takes the member its left context prefers
  /// (first member after an even token or at sentence start, second after an odd one).
  double context_agreement = 0.85;
  /// Standard deviation of the per-frame Gaussian noise.
  double noise = 0.3;
  int d_feat = 8;
  int frames_per_token = 3;
  int min_len = 4;
  int max_len = 8;
  /// Share of in-domain sentences in the train and valid splits. Test is in-domain.
  double in_domain_rate = 0.25;
  /// Fraction of transcript tokens whose in-domain translation differs.
  double style_mismatch = 0.3;
  /// Norm of the fixed offset added to every in-domain frame.
  double channel_shift = 0.3;
  /// Transcript tokens that swap their translation with the next token's.
  int num_swap_triggers = 2;

  void validate() const;
};

/// Deterministic rules derived from (spec, seed).
struct TaskRules {
  std::vector<int> acoustic_class;          // per transcript token
  std::vector<std::vector<double>> class_embedding;  // unit vectors, d_feat each
  std::vector<double> channel_offset;
  std::vector<int> out_domain_map;  // transcript token -> translation token
  std::vector<int> in_domain_map;
  std::vector<bool> swap_trigger;
  std::vector<int> homophone_partner;  // -1 if none
};

TaskRules make_rules(const TaskSpec& spec, std::uint64_t seed);

/// Translation of a content-index transcript under the domain's rule.
std::vector<int> translate(const TaskRules& rules, const std::vector<int>& transcript, Domain domain);

Vocabulary transcript_vocabulary(const TaskSpec& spec);
Vocabulary translation_vocabulary(const TaskSpec& spec);

/// One (speech, transcript, translation) record. Token ids are vocabulary ids.
struct TripletExample {
  std::string id;
  Domain domain = Domain::kOut;
  AcousticSequence x;
  std::vector<int> transcript;
  std::vector<int> translation;
};

struct Dataset {
  Vocabulary transcript_vocab;
  Vocabulary translation_vocab;
  std::vector<TripletExample> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  Dataset filter(Domain domain) const;
  /// Order-sensitive digest of ids, tokens and frames.
  std::uint64_t fingerprint() const;
};

struct DatasetSplits {
  Dataset train;
  Dataset valid;
  Dataset test;
};

DatasetSplits generate_dataset(const TaskSpec& spec, std::size_t n_train, std::size_t n_valid,
                               std::size_t n_test, std::uint64_t seed);

/// JSONL, one object per line:
/// {"id", "domain", "frames": [[f64; d_feat]; T], "transcript": [str], "translation": [str]}.
void write_jsonl(const Dataset& split, const std::filesystem::path& path);
Dataset read_jsonl(const std::filesystem::path& path, const Vocabulary& transcript_vocab,
                   const Vocabulary& translation_vocab);

}  // namespace cascadion

#endif  // CASCADION_SYNTHDATA_H_
