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

#include "cascadion/losses.h"

#include <cmath>

#include "cascadion/common.h"

namespace cascadion {

namespace {

ModelGradients slice(const Gradients& grads, const BoundModel& bound) {
  const std::size_t n = bound.vars().size();
  return ModelGradients(grads.begin() + static_cast<std::ptrdiff_t>(bound.first_leaf()),
                        grads.begin() + static_cast<std::ptrdiff_t>(bound.first_leaf() + n));
}

void check_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) throw Error(std::string(what) + ": loss is not finite");
}

}  // namespace

Var sequence_log_likelihood(const std::vector<StepOutput>& steps, std::span<const int> target) {
  if (steps.size() != target.size() + 1) throw Error("sequence_log_likelihood: step count mismatch");
  std::vector<Var> picked;
  picked.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int gold = i < target.size() ? target[i] : Vocabulary::kEos;
    picked.push_back(gather(steps[i].log_probs, static_cast<std::size_t>(gold)));
  }
  return sum(concat(picked));
}

Var label_smoothed_ce(const BoundModel& model, const EncoderStates& enc,
                      std::span<const int> target, double alpha, Reduction reduction) {
  if (target.empty()) throw Error("label_smoothed_ce: empty target");
  if (alpha < 0.0 || alpha >= 1.0) throw Error("label_smoothed_ce: alpha must lie in [0, 1)");
  const std::vector<StepOutput> steps = teacher_force(model, enc, target);
  Var total;
  if (alpha == 0.0) {
    total = scale(sequence_log_likelihood(steps, target), -1.0);
  } else {
    const int vocab = model.model().target_vocab().size();
    std::vector<std::size_t> non_pad;
    for (int v = 0; v < vocab; ++v) {
      if (v != Vocabulary::kPad) non_pad.push_back(static_cast<std::size_t>(v));
    }
    const double smooth = alpha / static_cast<double>(non_pad.size());
    std::vector<Var> terms;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const int gold = i < target.size() ? target[i] : Vocabulary::kEos;
      Var nll = scale(gather(steps[i].log_probs, static_cast<std::size_t>(gold)), -(1.0 - alpha));
      Var uniform = scale(sum(gather(steps[i].log_probs, non_pad)), -smooth);
      terms.push_back(add(nll, uniform));
    }
    total = sum(concat(terms));
  }
  if (reduction == Reduction::kMean) total = scale(total, 1.0 / static_cast<double>(steps.size()));
  return total;
}

LossReport label_smoothed_ce(const SeqModel& model, const Source& source,
                             std::span<const int> target, double alpha, Reduction reduction) {
  GradTape tape;
  BoundModel bound(model, &tape);
  Var loss = label_smoothed_ce(bound, encode(bound, source), target, alpha, reduction);
  LossReport report;
  report.loss = loss.value().item();
  check_finite(report.loss, "label_smoothed_ce");
  const Gradients grads = tape.backward(loss);
  (model.kind() == ModelKind::kAsr ? report.asr_grads : report.mt_grads) = slice(grads, bound);
  return report;
}

TopKObjective topk_objective(const BoundModel& asr, const BoundModel& mt,
                             const AcousticSequence& x, std::span<const int> translation,
                             std::span<const Hypothesis> transcripts, bool asr_weights) {
  if (transcripts.empty()) throw Error("topk_objective: no transcript hypotheses");
  if (translation.empty()) throw Error("topk_objective: empty translation");
  const EncoderStates asr_enc = encode_frames(asr, x);

  std::vector<Var> asr_scores;
  std::vector<Var> mt_scores;
  for (const Hypothesis& h : transcripts) {
    const std::vector<int> f = h.content();
    const auto asr_steps = teacher_force(asr, asr_enc, f);
    asr_scores.push_back(scale(sequence_log_likelihood(asr_steps, f),
                               1.0 / static_cast<double>(f.size() + 1)));

    const TokenSequence src = mt_source(h);
    const EncoderStates mt_enc = encode_tokens(mt, src);
    mt_scores.push_back(sequence_log_likelihood(teacher_force(mt, mt_enc, translation), translation));
  }
  TopKObjective out;
  out.log_weights = log_softmax(concat(asr_scores));
  Var joint = concat(mt_scores);
  if (asr_weights) joint = add(out.log_weights, joint);
  out.loss = scale(log_sum_exp(joint), -1.0);
  return out;
}

std::vector<Hypothesis> topk_transcripts(const SeqModel& asr, const AcousticSequence& x, int n,
                                         int k, int max_len) {
  if (k < 1 || k > n) throw Error("topk_transcripts: need 1 <= K <= N");
  KBestList list = beam_search(asr, x, SearchOptions{n, max_len});
  if (list.size() > static_cast<std::size_t>(k)) list.hyps.resize(k);
  return list.hyps;
}

LossReport topk_train_loss(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                           std::span<const int> translation,
                           std::span<const Hypothesis> transcripts) {
  GradTape tape;
  BoundModel asr_bound(asr, &tape);
  BoundModel mt_bound(mt, &tape);
  const TopKObjective obj = topk_objective(asr_bound, mt_bound, x, translation, transcripts);
  LossReport report;
  report.loss = obj.loss.value().item();
  check_finite(report.loss, "topk_train_loss");
  const Gradients grads = tape.backward(obj.loss);
  report.asr_grads = slice(grads, asr_bound);
  report.mt_grads = slice(grads, mt_bound);
  std::vector<double> weights;
  for (double lw : obj.log_weights.value().values()) weights.push_back(std::exp(lw));
  report.diagnostics["topk_weights"] = std::move(weights);
  return report;
}

LossReport topk_train_loss(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                           std::span<const int> translation, int n, int k, int max_len) {
  const std::vector<Hypothesis> hyps = topk_transcripts(asr, x, n, k, max_len);
  return topk_train_loss(asr, mt, x, translation, hyps);
}

Var tight_objective(const BoundModel& asr, const BoundModel& mt, const AcousticSequence& x,
                    std::span<const int> transcript, std::span<const int> translation,
                    double gamma, double alpha) {
  if (transcript.empty()) throw Error("tight_train_loss: empty transcript");
  const EncoderStates asr_enc = encode_frames(asr, x);
  Var soft = sharpened_posteriors(asr, asr_enc, transcript, gamma);
  return label_smoothed_ce(mt, encode_soft(mt, soft), translation, alpha);
}

LossReport tight_train_loss(const SeqModel& asr, const SeqModel& mt, const AcousticSequence& x,
                            std::span<const int> transcript, std::span<const int> translation,
                            double gamma, double alpha) {
  GradTape tape;
  BoundModel asr_bound(asr, &tape);
  BoundModel mt_bound(mt, &tape);
  Var loss = tight_objective(asr_bound, mt_bound, x, transcript, translation, gamma, alpha);
  LossReport report;
  report.loss = loss.value().item();
  check_finite(report.loss, "tight_train_loss");
  const Gradients grads = tape.backward(loss);
  report.asr_grads = slice(grads, asr_bound);
  report.mt_grads = slice(grads, mt_bound);
  return report;
}

}  // namespace cascadion
