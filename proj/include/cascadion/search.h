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

#ifndef CASCADION_SEARCH_H_
#define CASCADION_SEARCH_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cascadion/model.h"

namespace cascadion {

/// BOS ... EOS token sequence with its summed and length-normalized log-score.
struct Hypothesis {
  std::vector<int> tokens;
  double sum_logprob = 0.0;
  /// sum_logprob / emitted length; EOS counts, BOS does not.
  double norm_logprob = 0.0;
  /// Forcibly terminated at max_len without producing EOS.
  bool truncated = false;

  /// Tokens without the BOS/EOS delimiters.
  std::vector<int> content() const;
  std::size_t emitted_length() const { return tokens.empty() ? 0 : tokens.size() - 1; }
};

/// Ranking order: norm_logprob descending, then token ids lexicographically ascending.
bool ranks_before(const Hypothesis& a, const Hypothesis& b);

struct KBestList {
  std::vector<Hypothesis> hyps;
  int beam_size = 0;

  bool empty() const { return hyps.empty(); }
  const Hypothesis& best() const;
  std::size_t size() const { return hyps.size(); }
};

struct SearchOptions {
  int beam_size = 12;
  /// Maximum emitted tokens, EOS included.
  int max_len = 16;
};

/// Beam search over the target vocabulary. Each step expands every active
/// hypothesis by every emittable token (PAD, BOS and UNK are masked), keeps the
/// best `beam_size` expansions by summed log-probability, and sets aside those
/// ending in EOS. Search stops once `beam_size` hypotheses finished, the beam
/// empties, or `max_len` is reached. Finished hypotheses are ranked by
/// norm_logprob. If none finished, the surviving partial hypotheses are
/// returned with an EOS appended and `truncated` set.
KBestList beam_search(const SeqModel& model, const Source& source, const SearchOptions& options);

/// Local renormalization of the length-normalized scores of the first K
/// hypotheses: p(F_k) = exp(norm_k) / sum_{k' <= K} exp(norm_k').
struct TopKWeights {
  std::vector<double> probs;
  std::vector<double> log_probs;
  int requested_k = 0;
  int used_k = 0;
  /// requested_k exceeded the list length.
  bool clamped() const { return used_k < requested_k; }
};

TopKWeights renormalize_topk(const KBestList& list, int k);

/// p^gamma / sum p^gamma, computed in log space. gamma == 1 returns p unchanged.
std::vector<double> sharpen(std::span<const double> p, double gamma);

struct CascadeResult {
  Hypothesis transcript;
  Hypothesis translation;
  bool truncated = false;
};

struct TopKSearchResult {
  Hypothesis translation;
  std::size_t chosen = 0;
  std::vector<Hypothesis> transcripts;   // F_1 .. F_K actually used
  std::vector<Hypothesis> translations;  // E_k, MT 1-best for each F_k
  TopKWeights weights;
  std::vector<double> log_scores;  // log p(F_k|x) + norm_logprob(E_k)
  bool truncated = false;
};

struct TightResult {
  Hypothesis transcript;
  Hypothesis translation;
  SoftSource soft_source;
  bool truncated = false;
};

/// MT source for a transcript hypothesis. An empty transcript becomes a single UNK.
TokenSequence mt_source(const Hypothesis& transcript);

CascadeResult cascade_translate(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                                const SearchOptions& asr_options, const SearchOptions& mt_options);

/// argmax_k p(F_k|x) * p(E_k|F_k) over the ASR K-best; ties go to the smaller k.
TopKSearchResult topk_search(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                             int k, const SearchOptions& asr_options,
                             const SearchOptions& mt_options);

/// Per-position ASR posteriors along `transcript` (content tokens), sharpened
/// by gamma. Row j is the distribution the ASR decoder emitted f_j from.
Var sharpened_posteriors(const BoundModel& asr, const EncoderStates& enc,
                         std::span<const int> transcript, double gamma);

/// ASR 1-best, its sharpened posteriors as a SoftSource, then MT beam search on it.
TightResult tight_translate(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                            double gamma, const SearchOptions& asr_options,
                            const SearchOptions& mt_options);

/// Debug/interop dump: one JSON object per source,
/// {"id", "hyps": [{"tokens", "sum_logprob", "norm_logprob"}]}.
void write_kbest_jsonl(std::ostream& out, const std::string& id, const KBestList& list,
                       const Vocabulary& vocab);

}  // namespace cascadion

#endif  // CASCADION_SEARCH_H_
