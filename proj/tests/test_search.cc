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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cascadion/common.h"
#include "cascadion/search.h"
#include "reference_model.h"
#include "test_support.h"

namespace cascadion {
namespace {

namespace ref = testing::reference;
using testing::random_asr;
using testing::random_frames;
using testing::random_mt;
using testing::random_tokens;
using testing::scaled;
using testing::small_vocab;

Hypothesis hyp(std::vector<int> content, double norm) {
  Hypothesis h;
  h.tokens = {Vocabulary::kBos};
  h.tokens.insert(h.tokens.end(), content.begin(), content.end());
  h.tokens.push_back(Vocabulary::kEos);
  h.norm_logprob = norm;
  h.sum_logprob = norm * static_cast<double>(h.emitted_length());
  return h;
}

TEST(BeamSearch, MatchesExhaustiveSearchWhenBeamCoversEverything) {
  Vocabulary v = small_vocab(8, "t");  // 4 content symbols + EOS are emittable
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    std::mt19937_64 rng(seed);
    SeqModel mt = scaled(random_mt(v, v, 6, seed), 3.0);
    const std::vector<int> src = random_tokens(3, v.size(), rng);
    const KBestList list = beam_search(mt, TokenSequence(src), {625, 4});
    const ref::Scored want = ref::brute_force_best(mt, ref::encode_tokens(mt, src), 4);
    EXPECT_EQ(list.best().content(), want.content) << "seed " << seed;
    EXPECT_NEAR(list.best().norm_logprob, want.norm, 1e-12);
    EXPECT_FALSE(list.best().truncated);
  }
}

TEST(BeamSearch, HypothesisInvariants) {
  Vocabulary v = small_vocab(9, "t");
  std::mt19937_64 rng(3);
  SeqModel asr = scaled(random_asr(v, 6, 3, 3), 2.0);
  AcousticSequence x = random_frames(6, 3, rng);
  const KBestList list = beam_search(asr, x, {5, 6});
  ASSERT_FALSE(list.empty());
  EXPECT_LE(list.size(), 5u);
  const auto encoded = ref::encode_frames(asr, x.frames);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Hypothesis& h = list.hyps[i];
    EXPECT_EQ(h.tokens.front(), Vocabulary::kBos);
    EXPECT_EQ(h.tokens.back(), Vocabulary::kEos);
    EXPECT_LE(h.emitted_length(), 6u);
    for (int t : h.content()) {
      EXPECT_GE(t, Vocabulary::kNumReserved);
    }
    EXPECT_NEAR(h.sum_logprob, ref::sequence_logprob(asr, encoded, h.content()), 1e-12);
    EXPECT_DOUBLE_EQ(h.norm_logprob, h.sum_logprob / static_cast<double>(h.emitted_length()));
    if (i > 0) {
      EXPECT_FALSE(ranks_before(list.hyps[i], list.hyps[i - 1]));
    }
  }
}

TEST(BeamSearch, TruncatesWhenNothingFinishes) {
  Vocabulary v = small_vocab(6, "t");
  SeqModel mt = random_mt(v, v, 4, 1);
  // Make EOS practically impossible.
  Tensor& b = mt.mutable_tensors()[mt.names().size() - 1];
  b[Vocabulary::kEos] = -1e4;
  const KBestList list = beam_search(mt, TokenSequence{4, 5}, {2, 3});
  ASSERT_FALSE(list.empty());
  EXPECT_TRUE(list.best().truncated);
  EXPECT_EQ(list.best().tokens.back(), Vocabulary::kEos);
  EXPECT_EQ(list.best().content().size(), 3u);
}

TEST(BeamSearch, RejectsBadOptions) {
  Vocabulary v = small_vocab(6, "t");
  SeqModel mt = random_mt(v, v, 4, 1);
  EXPECT_THROW(beam_search(mt, TokenSequence{4}, {0, 4}), Error);
  EXPECT_THROW(beam_search(mt, TokenSequence{4}, {2, 1}), Error);
}

TEST(TopKWeights, HandArithmetic) {
  KBestList list;
  list.hyps = {hyp({4}, std::log(0.6)), hyp({5}, std::log(0.2))};
  const TopKWeights w = renormalize_topk(list, 2);
  EXPECT_NEAR(w.probs[0], 0.75, 1e-12);
  EXPECT_NEAR(w.probs[1], 0.25, 1e-12);
  EXPECT_NEAR(w.log_probs[0], std::log(0.75), 1e-12);
  EXPECT_FALSE(w.clamped());
}

TEST(TopKWeights, SumToOneAndPreserveRanking) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-30.0, 0.0);
  for (int trial = 0; trial < 200; ++trial) {
    KBestList list;
    for (int i = 0; i < 8; ++i) list.hyps.push_back(hyp({4 + i % 3}, u(rng)));
    std::sort(list.hyps.begin(), list.hyps.end(), ranks_before);
    const TopKWeights w = renormalize_topk(list, 1 + trial % 8);
    double total = 0.0;
    for (double p : w.probs) total += p;
    EXPECT_NEAR(total, 1.0, 1e-9);
    for (std::size_t i = 1; i < w.probs.size(); ++i) EXPECT_GE(w.probs[i - 1], w.probs[i]);
  }
}

TEST(TopKWeights, ClampsToListLength) {
  KBestList list;
  list.hyps = {hyp({4}, -1.0)};
  const TopKWeights w = renormalize_topk(list, 4);
  EXPECT_TRUE(w.clamped());
  EXPECT_EQ(w.used_k, 1);
  EXPECT_EQ(w.probs[0], 1.0);
  EXPECT_THROW(renormalize_topk(list, 0), Error);
  EXPECT_THROW(renormalize_topk(KBestList{}, 1), Error);
}

TEST(Sharpen, IdentityAtOneAndLimits) {
  const std::vector<double> p = {0.1, 0.2, 0.30000000000000004, 0.4};
  const auto same = sharpen(p, 1.0);
  ASSERT_EQ(same.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(std::memcmp(&same[i], &p[i], sizeof(double)), 0);
  const auto sharp = sharpen(p, 1e4);
  EXPECT_EQ(sharp[3], 1.0);
  EXPECT_EQ(sharp[0], 0.0);
  const auto flat = sharpen(p, 1e-6);
  EXPECT_NEAR(flat[0], 0.25, 1e-5);
  const auto sq = sharpen(std::vector<double>{0.25, 0.75}, 2.0);
  EXPECT_NEAR(sq[0], 0.0625 / 0.625, 1e-15);
  EXPECT_THROW(sharpen(p, 0.0), Error);
}

TEST(Cascade, TopKSearchWithOneCandidateIsTheCascade) {
  Vocabulary vf = small_vocab(9, "f");
  Vocabulary ve = small_vocab(9, "e");
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    SeqModel asr = scaled(random_asr(vf, 6, 3, seed), 2.0);
    SeqModel mt = scaled(random_mt(vf, ve, 6, seed + 100), 2.0);
    AcousticSequence x = random_frames(6, 3, rng);
    const CascadeResult c = cascade_translate(asr, mt, x, {4, 6}, {4, 6});
    const TopKSearchResult t = topk_search(asr, mt, x, 1, {4, 6}, {4, 6});
    EXPECT_EQ(c.translation.tokens, t.translation.tokens);
    EXPECT_EQ(c.transcript.tokens, t.transcripts[0].tokens);
    EXPECT_EQ(t.chosen, 0u);
  }
}

TEST(Cascade, TopKSearchPicksTheBestCombinedScore) {
  Vocabulary vf = small_vocab(9, "f");
  Vocabulary ve = small_vocab(9, "e");
  std::mt19937_64 rng(8);
  SeqModel asr = scaled(random_asr(vf, 6, 3, 8), 2.0);
  SeqModel mt = scaled(random_mt(vf, ve, 6, 9), 2.0);
  AcousticSequence x = random_frames(6, 3, rng);
  const TopKSearchResult t = topk_search(asr, mt, x, 4, {6, 6}, {4, 6});
  ASSERT_EQ(t.log_scores.size(), t.transcripts.size());
  for (std::size_t k = 0; k < t.log_scores.size(); ++k) {
    const Hypothesis e = beam_search(mt, mt_source(t.transcripts[k]), {4, 6}).best();
    EXPECT_EQ(e.tokens, t.translations[k].tokens);
    EXPECT_NEAR(t.log_scores[k], t.weights.log_probs[k] + e.norm_logprob, 1e-15);
    EXPECT_LE(t.log_scores[k], t.log_scores[t.chosen]);
  }
  EXPECT_THROW(topk_search(asr, mt, x, 7, {6, 6}, {4, 6}), Error);
}

TEST(Cascade, EmptyTranscriptBecomesUnknown) {
  Hypothesis h = hyp({}, -1.0);
  EXPECT_EQ(mt_source(h), (TokenSequence{Vocabulary::kUnk}));
}

TEST(Tight, PosteriorsAtGammaOneAreTheModelPosteriors) {
  Vocabulary vf = small_vocab(8, "f");
  std::mt19937_64 rng(2);
  SeqModel asr = scaled(random_asr(vf, 6, 3, 2), 2.0);
  AcousticSequence x = random_frames(6, 3, rng);
  const std::vector<int> f = {4, 7, 5};
  BoundModel b(asr, nullptr);
  const EncoderStates enc = encode_frames(b, x);
  const Tensor p = sharpened_posteriors(b, enc, f, 1.0).value();
  const auto steps = teacher_force(b, enc, f);
  ASSERT_EQ(p.rows(), f.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    const Tensor direct = softmax(steps[j].logits).value();
    for (std::size_t c = 0; c < p.cols(); ++c) {
      EXPECT_EQ(std::memcmp(&p.row(j)[c], &direct.values()[c], sizeof(double)), 0);
    }
  }
  const Tensor sharp = sharpened_posteriors(b, enc, f, 3.0).value();
  for (std::size_t j = 0; j < f.size(); ++j) {
    std::vector<double> row(p.row(j).begin(), p.row(j).end());
    const auto want = sharpen(row, 3.0);
    for (std::size_t c = 0; c < p.cols(); ++c) EXPECT_NEAR(sharp.at(j, c), want[c], 1e-12);
  }
}

TEST(KBestJsonl, WritesOneLinePerList) {
  Vocabulary v = small_vocab(6, "t");
  KBestList list;
  list.hyps = {hyp({4, 5}, -0.5)};
  std::ostringstream out;
  write_kbest_jsonl(out, "ex-1", list, v);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["id"], "ex-1");
  EXPECT_EQ(j["hyps"][0]["tokens"], (std::vector<std::string>{"<s>", "t0", "t1", "</s>"}));
  EXPECT_DOUBLE_EQ(j["hyps"][0]["norm_logprob"].get<double>(), -0.5);
}

}  // namespace
}  // namespace cascadion
