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

#include "cascadion/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "cascadion/common.h"

namespace cascadion {

NgramStats& NgramStats::operator+=(const NgramStats& other) {
  for (int n = 0; n < 4; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hyp_length += other.hyp_length;
  ref_length += other.ref_length;
  return *this;
}

namespace {

std::map<std::vector<int>, std::size_t> count_ngrams(std::span<const int> tokens, std::size_t n) {
  std::map<std::vector<int>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<int>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

double brevity_penalty(std::size_t c, std::size_t r) {
  if (c >= r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

}  // namespace

NgramStats ngram_stats(std::span<const int> hyp, std::span<const int> ref) {
  NgramStats s;
  s.hyp_length = hyp.size();
  s.ref_length = ref.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = count_ngrams(hyp, n);
    const auto r = count_ngrams(ref, n);
    for (const auto& [gram, count] : h) {
      auto it = r.find(gram);
      if (it != r.end()) s.matches[n - 1] += std::min(count, it->second);
    }
    s.totals[n - 1] = hyp.size() >= n ? hyp.size() - n + 1 : 0;
  }
  return s;
}

double sentence_bleu(std::span<const int> hyp, std::span<const int> ref) {
  if (ref.empty()) throw Error("sentence_bleu: empty reference");
  if (hyp.empty()) return 0.0;
  const NgramStats s = ngram_stats(hyp, ref);
  if (s.matches[0] == 0) return 0.0;
  double log_sum = std::log(static_cast<double>(s.matches[0]) / static_cast<double>(s.totals[0]));
  for (int n = 1; n < 4; ++n) {
    log_sum += std::log((static_cast<double>(s.matches[n]) + 1.0) /
                        (static_cast<double>(s.totals[n]) + 1.0));
  }
  return 100.0 * brevity_penalty(s.hyp_length, s.ref_length) * std::exp(log_sum / 4.0);
}

double corpus_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  if (hyps.size() != refs.size()) {
    throw Error("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses vs " +
                std::to_string(refs.size()) + " references");
  }
  NgramStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += ngram_stats(hyps[i], refs[i]);
  if (total.hyp_length == 0 || total.matches[0] == 0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < 4; ++n) {
    if (total.totals[n] == 0) continue;
    if (total.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(total.matches[n]) / static_cast<double>(total.totals[n]));
    ++orders;
  }
  return 100.0 * brevity_penalty(total.hyp_length, total.ref_length) * std::exp(log_sum / orders);
}

std::size_t edit_distance(std::span<const int> hyp, std::span<const int> ref) {
  std::vector<std::size_t> prev(ref.size() + 1), cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

double wer(std::span<const int> hyp, std::span<const int> ref) {
  if (ref.empty()) throw Error("wer: empty reference");
  return static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

double corpus_wer(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  if (hyps.size() != refs.size()) throw Error("corpus_wer: length mismatch");
  std::size_t edits = 0, words = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (refs[i].empty()) throw Error("corpus_wer: empty reference");
    edits += edit_distance(hyps[i], refs[i]);
    words += refs[i].size();
  }
  if (words == 0) throw Error("corpus_wer: no references");
  return static_cast<double>(edits) / static_cast<double>(words);
}

std::size_t oracle_select(const std::vector<Tokens>& candidates, std::span<const int> ref) {
  if (candidates.empty()) throw Error("oracle_select: no candidates");
  std::size_t best = 0;
  double best_score = sentence_bleu(candidates[0], ref);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double score = sentence_bleu(candidates[i], ref);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["bleu"] = bleu;
  j["sentence_bleu"] = sentence_bleu;
  j["wer"] = wer ? nlohmann::json(*wer) : nlohmann::json(nullptr);
  j["sentences"] = sentences;
  j["reference_tokens"] = reference_tokens;
  return j.dump();
}

MetricReport evaluate_translations(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  MetricReport report;
  report.bleu = corpus_bleu(hyps, refs);
  report.sentences = refs.size();
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    report.sentence_bleu.push_back(sentence_bleu(hyps[i], refs[i]));
    report.reference_tokens += refs[i].size();
  }
  return report;
}

}  // namespace cascadion
