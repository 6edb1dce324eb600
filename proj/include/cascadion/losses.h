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

#ifndef CASCADION_LOSSES_H_
#define CASCADION_LOSSES_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cascadion/model.h"
#include "cascadion/search.h"

namespace cascadion {

enum class Reduction { kMean, kSum };

/// Gradients aligned with SeqModel::tensors().
using ModelGradients = std::vector<Tensor>;

struct LossReport {
  double loss = 0.0;
  ModelGradients asr_grads;  // empty when the loss does not involve an ASR model
  ModelGradients mt_grads;
  /// e.g. "topk_weights" -> renormalized p(F_k|x).
  std::map<std::string, std::vector<double>> diagnostics;
};

/// sum_i log p(t_i | t_<i) over the content tokens and the final EOS.
Var sequence_log_likelihood(const std::vector<StepOutput>& steps, std::span<const int> target);

/// Cross-entropy against q = (1 - alpha) one-hot + alpha uniform over the
/// non-PAD vocabulary, over I + 1 positions (EOS included).
Var label_smoothed_ce(const BoundModel& model, const EncoderStates& enc,
                      std::span<const int> target, double alpha,
                      Reduction reduction = Reduction::kMean);

LossReport label_smoothed_ce(const SeqModel& model, const Source& source,
                             std::span<const int> target, double alpha,
                             Reduction reduction = Reduction::kMean);

struct TopKObjective {
  Var loss;         // -log sum_k p(F_k|x) prod_i p(e_i|F_k; e_<i)
  Var log_weights;  // log p(F_k|x), renormalized over the given transcripts
};

/// Marginalized cascade likelihood over fixed transcript hypotheses. The ASR
/// enters only through the renormalized, length-normalized transcript scores,
/// which are recomputed on the tape by teacher forcing each hypothesis.
/// With `asr_weights` false the weight term is dropped (plain sum of MT
/// likelihoods), which cuts every gradient path into the ASR model.
TopKObjective topk_objective(const BoundModel& asr, const BoundModel& mt,
                             const AcousticSequence& x, std::span<const int> translation,
                             std::span<const Hypothesis> transcripts, bool asr_weights = true);

/// First K entries of the ASR beam (beam size N). Hypothesis identities are
/// constants of the objective.
std::vector<Hypothesis> topk_transcripts(const SeqModel& asr, const AcousticSequence& x, int n,
                                         int k, int max_len);

LossReport topk_train_loss(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                           std::span<const int> translation,
                           std::span<const Hypothesis> transcripts);

LossReport topk_train_loss(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                           std::span<const int> translation, int n, int k, int max_len);

/// Teacher-forces the gold transcript through the ASR, sharpens the
/// per-position posteriors with gamma and feeds them to the MT encoder as a
/// soft source; loss is the MT label-smoothed CE of the translation.
Var tight_objective(const BoundModel& asr, const BoundModel& mt, const AcousticSequence& x,
                    std::span<const int> transcript, std::span<const int> translation,
                    double gamma, double alpha);

LossReport tight_train_loss(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                            std::span<const int> transcript, std::span<const int> translation,
                            double gamma, double alpha);

}  // namespace cascadion

#endif  // CASCADION_LOSSES_H_
