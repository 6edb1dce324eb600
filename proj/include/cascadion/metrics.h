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

#ifndef CASCADION_METRICS_H_
#define CASCADION_METRICS_H_

#include <array>
#include <optional>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cascadion {

using Tokens = std::vector<int>;

/// Clipped n-gram statistics of one hypothesis against one reference, n = 1..4.
struct NgramStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  NgramStats& operator+=(const NgramStats& other);
};

NgramStats ngram_stats(std::span<const int> hyp, std::span<const int> ref);

/// BLEU-4 in [0, 100]: unigram precision unsmoothed, add-one smoothing for
/// n >= 2, brevity penalty exp(1 - r/c) when c < r. Empty hypothesis -> 0.
double sentence_bleu(std::span<const int> hyp, std::span<const int> ref);

/// Corpus BLEU-4 in [0, 100] from summed statistics (no smoothing). Orders
/// without any hypothesis n-gram contribute precision 1.
double corpus_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs);

std::size_t edit_distance(std::span<const int> hyp, std::span<const int> ref);

/// Levenshtein distance over reference length.
double wer(std::span<const int> hyp, std::span<const int> ref);

/// Total edits over total reference tokens.
double corpus_wer(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs);

/// Index of the candidate with the highest sentence BLEU; ties go to the lowest index.
std::size_t oracle_select(const std::vector<Tokens>& candidates, std::span<const int> ref);

struct MetricReport {
  double bleu = 0.0;
  std::vector<double> sentence_bleu;
  std::optional<double> wer;
  std::size_t sentences = 0;
  std::size_t reference_tokens = 0;

  /// Canonical JSON.
  std::string to_json() const;
};

MetricReport evaluate_translations(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs);

}  // namespace cascadion

#endif  // CASCADION_METRICS_H_
