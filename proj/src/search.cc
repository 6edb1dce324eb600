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

#include "cascadion/search.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "cascadion/common.h"

namespace cascadion {

std::vector<int> Hypothesis::content() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if ((i == 0 && t == Vocabulary::kBos) || (i + 1 == tokens.size() && t == Vocabulary::kEos)) {
      continue;
    }
    out.push_back(t);
  }
  return out;
}

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.norm_logprob != b.norm_logprob) return a.norm_logprob > b.norm_logprob;
  return a.tokens < b.tokens;
}

const Hypothesis& KBestList::best() const {
  if (hyps.empty()) throw Error("k-best list is empty");
  return hyps.front();
}

namespace {

struct Partial {
  std::vector<int> tokens;
  double sum = 0.0;
  DecoderState state;
  Tensor next_log_probs;
};

struct Candidate {
  std::size_t parent;
  int token;
  double score;
};

Hypothesis finish(std::vector<int> tokens, double sum, bool truncated) {
  Hypothesis h;
  h.tokens = std::move(tokens);
  h.sum_logprob = sum;
  h.norm_logprob = sum / static_cast<double>(h.emitted_length());
  h.truncated = truncated;
  return h;
}

}  // namespace

KBestList beam_search(const SeqModel& model, const Source& source, const SearchOptions& options) {
  if (options.beam_size < 1) throw Error("beam_search: beam size must be >= 1");
  if (options.max_len < 2) throw Error("beam_search: max_len must be >= 2");
  const std::size_t beam = static_cast<std::size_t>(options.beam_size);

  BoundModel bound(model, nullptr);
  const EncoderStates enc = encode(bound, source);
  const int vocab = model.target_vocab().size();

  std::vector<int> emittable;
  for (int v = 0; v < vocab; ++v) {
    if (v != Vocabulary::kPad && v != Vocabulary::kBos && v != Vocabulary::kUnk) emittable.push_back(v);
  }

  std::vector<Partial> active(1);
  active[0].tokens = {Vocabulary::kBos};
  {
    StepOutput first = decoder_step(bound, enc, initial_decoder_state(enc), Vocabulary::kBos);
    active[0].state = first.state;
    active[0].next_log_probs = first.log_probs.value();
  }

  std::vector<Hypothesis> finished;
  std::vector<Partial> unfinished_at_limit;
  std::vector<Candidate> candidates;
  for (int step = 1; step <= options.max_len && !active.empty(); ++step) {
    candidates.clear();
    for (std::size_t p = 0; p < active.size(); ++p) {
      for (int v : emittable) {
        candidates.push_back({p, v, active[p].sum + active[p].next_log_probs[v]});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      const auto& ta = active[a.parent].tokens;
      const auto& tb = active[b.parent].tokens;
      if (ta != tb) return ta < tb;
      return a.token < b.token;
    });
    if (candidates.size() > beam) candidates.resize(beam);

    std::vector<Partial> next;
    for (const Candidate& c : candidates) {
      const Partial& parent = active[c.parent];
      std::vector<int> tokens = parent.tokens;
      tokens.push_back(c.token);
      if (c.token == Vocabulary::kEos) {
        finished.push_back(finish(std::move(tokens), c.score, false));
        continue;
      }
      Partial child;
      child.tokens = std::move(tokens);
      child.sum = c.score;
      if (step < options.max_len) {
        StepOutput out = decoder_step(bound, enc, parent.state, c.token);
        child.state = out.state;
        child.next_log_probs = out.log_probs.value();
        next.push_back(std::move(child));
      } else {
        unfinished_at_limit.push_back(std::move(child));
      }
    }
    active = std::move(next);
    if (finished.size() >= beam) break;
  }

  if (finished.empty()) {
    for (auto& p : unfinished_at_limit) {
      p.tokens.push_back(Vocabulary::kEos);
      finished.push_back(finish(std::move(p.tokens), p.sum, true));
    }
  }
  std::sort(finished.begin(), finished.end(), ranks_before);
  if (finished.size() > beam) finished.resize(beam);

  KBestList list;
  list.hyps = std::move(finished);
  list.beam_size = options.beam_size;
  return list;
}

TopKWeights renormalize_topk(const KBestList& list, int k) {
  if (k < 1) throw Error("renormalize_topk: K must be >= 1");
  if (list.empty()) throw Error("renormalize_topk: empty k-best list");
  TopKWeights w;
  w.requested_k = k;
  w.used_k = std::min<int>(k, static_cast<int>(list.size()));
  std::vector<double> scores;
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < w.used_k; ++i) {
    scores.push_back(list.hyps[i].norm_logprob);
    m = std::max(m, scores.back());
  }
  double s = 0.0;
  for (double v : scores) s += std::exp(v - m);
  const double lse = m + std::log(s);
  for (double v : scores) {
    w.log_probs.push_back(v - lse);
    w.probs.push_back(std::exp(v - lse));
  }
  return w;
}

std::vector<double> sharpen(std::span<const double> p, double gamma) {
  if (!(gamma > 0.0)) throw Error("sharpen: gamma must be > 0");
  if (gamma == 1.0) return std::vector<double>(p.begin(), p.end());
  std::vector<double> scaled(p.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    scaled[i] = gamma * std::log(p[i]);
    m = std::max(m, scaled[i]);
  }
  double s = 0.0;
  for (double v : scaled) s += std::exp(v - m);
  const double lse = m + std::log(s);
  for (double& v : scaled) v = std::exp(v - lse);
  return scaled;
}

TokenSequence mt_source(const Hypothesis& transcript) {
  TokenSequence src = transcript.content();
  if (src.empty()) src.push_back(Vocabulary::kUnk);
  return src;
}

CascadeResult cascade_translate(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                                const SearchOptions& asr_options, const SearchOptions& mt_options) {
  CascadeResult r;
  r.transcript = beam_search(asr, x, asr_options).best();
  r.translation = beam_search(mt, mt_source(r.transcript), mt_options).best();
  r.truncated = r.transcript.truncated || r.translation.truncated;
  return r;
}

TopKSearchResult topk_search(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                             int k, const SearchOptions& asr_options,
                             const SearchOptions& mt_options) {
  if (k > asr_options.beam_size) throw Error("topk_search: K must not exceed the beam size");
  const KBestList asr_list = beam_search(asr, x, asr_options);
  TopKSearchResult r;
  r.weights = renormalize_topk(asr_list, k);
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < r.weights.used_k; ++i) {
    const Hypothesis& f = asr_list.hyps[i];
    Hypothesis e = beam_search(mt, mt_source(f), mt_options).best();
    const double score = r.weights.log_probs[i] + e.norm_logprob;
    if (i == 0 || score > best) {
      best = score;
      r.chosen = static_cast<std::size_t>(i);
    }
    r.log_scores.push_back(score);
    r.transcripts.push_back(f);
    r.translations.push_back(std::move(e));
  }
  r.translation = r.translations[r.chosen];
  r.truncated = r.transcripts[r.chosen].truncated || r.translation.truncated;
  return r;
}

Var sharpened_posteriors(const BoundModel& asr, const EncoderStates& enc,
                         std::span<const int> transcript, double gamma) {
  if (!(gamma > 0.0)) throw Error("sharpen: gamma must be > 0");
  if (transcript.empty()) throw Error("sharpened_posteriors: empty transcript");
  const std::vector<StepOutput> steps = teacher_force(asr, enc, transcript);
  std::vector<Var> rows;
  rows.reserve(transcript.size());
  for (std::size_t j = 0; j < transcript.size(); ++j) {
    const Var& logits = steps[j].logits;
    rows.push_back(gamma == 1.0 ? softmax(logits) : softmax(scale(logits, gamma)));
  }
  return stack(rows);
}

TightResult tight_translate(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                            double gamma, const SearchOptions& asr_options,
                            const SearchOptions& mt_options) {
  if (!(gamma > 0.0)) throw Error("tight_translate: gamma must be > 0");
  TightResult r;
  r.transcript = beam_search(asr, x, asr_options).best();
  const std::vector<int> f = r.transcript.content();
  if (f.empty()) {
    const int unk[1] = {Vocabulary::kUnk};
    r.soft_source = SoftSource::one_hot(unk, mt.source_vocab()->size());
  } else {
    BoundModel bound(asr, nullptr);
    const EncoderStates enc = encode_frames(bound, x);
    r.soft_source = SoftSource{sharpened_posteriors(bound, enc, f, gamma).value()};
  }
  r.translation = beam_search(mt, r.soft_source, mt_options).best();
  r.truncated = r.transcript.truncated || r.translation.truncated;
  return r;
}

void write_kbest_jsonl(std::ostream& out, const std::string& id, const KBestList& list,
                       const Vocabulary& vocab) {
  nlohmann::json hyps = nlohmann::json::array();
  for (const auto& h : list.hyps) {
    hyps.push_back({{"tokens", vocab.decode(h.tokens)},
                    {"sum_logprob", h.sum_logprob},
                    {"norm_logprob", h.norm_logprob}});
  }
  out << nlohmann::json{{"id", id}, {"hyps", std::move(hyps)}}.dump() << '\n';
}

}  // namespace cascadion
