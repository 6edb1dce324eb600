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

#include "cascadion/trainer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cascadion/common.h"
#include "cascadion/losses.h"

namespace cascadion {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kPretrainAsr: return "pretrain-asr";
    case TrainMode::kPretrainMt: return "pretrain-mt";
    case TrainMode::kFinetuneAsr: return "finetune-asr";
    case TrainMode::kFinetuneMt: return "finetune-mt";
    case TrainMode::kJointTopK: return "joint-topk";
    case TrainMode::kJointTight: return "joint-tight";
  }
  return "?";
}

TrainMode train_mode_from_string(std::string_view name) {
  for (TrainMode m : {TrainMode::kPretrainAsr, TrainMode::kPretrainMt, TrainMode::kFinetuneAsr,
                      TrainMode::kFinetuneMt, TrainMode::kJointTopK, TrainMode::kJointTight}) {
    if (to_string(m) == name) return m;
  }
  throw Error("unknown training mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("train: learning rate must be > 0");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) throw Error("train: alpha must lie in [0, 1)");
  if (k < 1) throw Error("train: K must be >= 1");
  if (k > beam_size) throw Error("train: K must not exceed the beam size");
  if (!(gamma > 0.0)) throw Error("train: gamma must be > 0");
  if (batch_size < 1 || epochs < 0) throw Error("train: batch size must be >= 1 and epochs >= 0");
  if (max_len < 2) throw Error("train: max_len must be >= 2");
}

namespace {

bool trains_asr(TrainMode m) {
  return m == TrainMode::kPretrainAsr || m == TrainMode::kFinetuneAsr ||
         m == TrainMode::kJointTopK || m == TrainMode::kJointTight;
}

bool trains_mt(TrainMode m) {
  return m == TrainMode::kPretrainMt || m == TrainMode::kFinetuneMt ||
         m == TrainMode::kJointTopK || m == TrainMode::kJointTight;
}


Dataset apply_filter(const Dataset& d, DomainFilter filter) {
  return filter == DomainFilter::kInDomain ? d.filter(Domain::kIn) : d;
}

void accumulate(ModelGradients& total, const ModelGradients& grads) {
  if (total.empty()) {
    total = grads;
    return;
  }
  for (std::size_t i = 0; i < total.size(); ++i) total[i] += grads[i];
}

void scale_grads(ModelGradients& grads, double factor) {
  for (auto& g : grads) {
    for (double& v : g.values()) v *= factor;
  }
}

std::vector<std::vector<Hypothesis>> refresh_hypotheses(const TrainConfig& config,
                                                        const SeqModel& asr, const Dataset& data) {
  std::vector<std::vector<Hypothesis>> hyps;
  hyps.reserve(data.size());
  for (const auto& ex : data.examples) {
    hyps.push_back(topk_transcripts(asr, ex.x, config.beam_size, config.k, config.max_len));
  }
  return hyps;
}

bool all_truncated(const std::vector<Hypothesis>& hyps) {
  return std::all_of(hyps.begin(), hyps.end(), [](const Hypothesis& h) { return h.truncated; });
}

LossReport example_loss(const TrainConfig& config, const CascadeModels& models,
                        const TripletExample& ex, const std::vector<Hypothesis>* hyps) {
  switch (config.mode) {
    case TrainMode::kPretrainAsr:
    case TrainMode::kFinetuneAsr:
      return label_smoothed_ce(*models.asr, ex.x, ex.transcript, config.label_smoothing);
    case TrainMode::kPretrainMt:
    case TrainMode::kFinetuneMt:
      return label_smoothed_ce(*models.mt, TokenSequence(ex.transcript), ex.translation,
                               config.label_smoothing);
    case TrainMode::kJointTopK:
      return topk_train_loss(*models.asr, *models.mt, ex.x, ex.translation, *hyps);
    case TrainMode::kJointTight:
      return tight_train_loss(*models.asr, *models.mt, ex.x, ex.transcript, ex.translation,
                              config.gamma, config.label_smoothing);
  }
  throw Error("train: unknown mode");
}

struct TokenCounts {
  std::size_t correct = 0;
  std::size_t total = 0;
};

double scored_ce(const SeqModel& model, const Source& source, std::span<const int> target,
                 TokenCounts& counts) {
  BoundModel bound(model, nullptr);
  const EncoderStates enc = encode(bound, source);
  const auto steps = teacher_force(bound, enc, target);
  double ll = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int gold = i < target.size() ? target[i] : Vocabulary::kEos;
    const auto lp = steps[i].log_probs.value().values();
    ll += lp[gold];
    const auto best = std::max_element(lp.begin(), lp.end()) - lp.begin();
    counts.correct += best == gold ? 1 : 0;
    ++counts.total;
  }
  return -ll / static_cast<double>(steps.size());
}

}  // namespace

ValidationScore validate_models(const TrainConfig& config, const CascadeModels& models,
                                const Dataset& data) {
  if (data.empty()) throw Error("validate: empty validation set");
  ValidationScore score;
  TokenCounts counts;
  double total = 0.0;
  for (const auto& ex : data.examples) {
    switch (config.mode) {
      case TrainMode::kPretrainAsr:
      case TrainMode::kFinetuneAsr:
        total += scored_ce(*models.asr, ex.x, ex.transcript, counts);
        break;
      case TrainMode::kPretrainMt:
      case TrainMode::kFinetuneMt:
        total += scored_ce(*models.mt, TokenSequence(ex.transcript), ex.translation, counts);
        break;
      case TrainMode::kJointTopK: {
        const auto hyps =
            topk_transcripts(*models.asr, ex.x, config.beam_size, config.k, config.max_len);
        BoundModel asr(*models.asr, nullptr);
        BoundModel mt(*models.mt, nullptr);
        total += topk_objective(asr, mt, ex.x, ex.translation, hyps).loss.value().item();
        break;
      }
      case TrainMode::kJointTight: {
        BoundModel asr(*models.asr, nullptr);
        BoundModel mt(*models.mt, nullptr);
        total += tight_objective(asr, mt, ex.x, ex.transcript, ex.translation, config.gamma, 0.0)
                     .value()
                     .item();
        break;
      }
    }
  }
  score.loss = total / static_cast<double>(data.size());
  if (counts.total > 0) {
    score.accuracy = static_cast<double>(counts.correct) / static_cast<double>(counts.total);
  }
  return score;
}

TrainResult train(const TrainConfig& config, const Dataset& train_data, const Dataset& valid_data,
                  CascadeModels initial) {
  config.validate();
  if (trains_asr(config.mode) && !initial.asr) {
    throw Error("train: mode " + std::string(to_string(config.mode)) + " needs an ASR model");
  }
  if (trains_mt(config.mode) && !initial.mt) {
    throw Error("train: mode " + std::string(to_string(config.mode)) + " needs an MT model");
  }
  const Dataset train_set = apply_filter(train_data, config.domain_filter);
  const Dataset valid_set = apply_filter(valid_data, config.domain_filter);
  if (train_set.empty()) throw Error("train: training set is empty after domain filtering");
  if (valid_set.empty()) throw Error("train: validation set is empty after domain filtering");

  const std::string mode_name(to_string(config.mode));
  const bool update_asr = trains_asr(config.mode);
  const bool update_mt = trains_mt(config.mode);
  CascadeModels current = std::move(initial);
  AdamState asr_state, mt_state;
  const AdamConfig adam = config.adam();

  TrainResult result;
  auto record_epoch = [&](EpochMetrics m) {
    const bool improved = result.log.empty() || m.valid_loss < result.log[result.best_epoch].valid_loss;
    spdlog::info("{} epoch {}: train {} valid {:.5f}{}", mode_name, m.epoch,
                 m.train_loss ? fmt::format("{:.5f}", *m.train_loss) : "-", m.valid_loss,
                 m.valid_accuracy ? fmt::format(" acc {:.4f}", *m.valid_accuracy) : "");
    if (improved) {
      result.best_epoch = m.epoch;
      result.models = current;
    }
    result.log.push_back(std::move(m));
  };

  {
    EpochMetrics m;
    m.epoch = 0;
    m.mode = mode_name;
    const ValidationScore v = validate_models(config, current, valid_set);
    m.valid_loss = v.loss;
    m.valid_accuracy = v.accuracy;
    if (!std::isfinite(m.valid_loss)) throw Error("train: initial validation loss is not finite");
    record_epoch(std::move(m));
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<Hypothesis>> hyps;
    if (config.mode == TrainMode::kJointTopK) hyps = refresh_hypotheses(config, *current.asr, train_set);

    EpochMetrics m;
    m.epoch = epoch;
    m.mode = mode_name;
    double loss_total = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      ModelGradients asr_grads, mt_grads;
      std::size_t in_batch = 0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const std::vector<Hypothesis>* ex_hyps = hyps.empty() ? nullptr : &hyps[idx];
        if (ex_hyps && all_truncated(*ex_hyps)) {
          ++m.skipped;
          continue;
        }
        LossReport r;
        try {
          r = example_loss(config, current, train_set.examples[idx], ex_hyps);
        } catch (const Error& e) {
          spdlog::debug("{}: skipping {}: {}", mode_name, train_set.examples[idx].id, e.what());
          ++m.skipped;
          continue;
        }
        loss_total += r.loss;
        ++counted;
        ++in_batch;
        if (update_asr) accumulate(asr_grads, r.asr_grads);
        if (update_mt) accumulate(mt_grads, r.mt_grads);
      }
      if (in_batch == 0) continue;
      const double inv = 1.0 / static_cast<double>(in_batch);
      if (update_asr) {
        scale_grads(asr_grads, inv);
        if (!adam_step(current.asr->mutable_tensors(), asr_grads, asr_state, adam)) {
          ++m.rejected_steps;
          spdlog::warn("{}: non-finite ASR gradient, step rejected", mode_name);
        }
      }
      if (update_mt) {
        scale_grads(mt_grads, inv);
        if (!adam_step(current.mt->mutable_tensors(), mt_grads, mt_state, adam)) {
          ++m.rejected_steps;
          spdlog::warn("{}: non-finite MT gradient, step rejected", mode_name);
        }
      }
    }
    result.skipped_examples += m.skipped;
    m.train_loss = counted ? loss_total / static_cast<double>(counted)
                           : std::numeric_limits<double>::quiet_NaN();
    const ValidationScore v = validate_models(config, current, valid_set);
    m.valid_loss = v.loss;
    m.valid_accuracy = v.accuracy;
    if (!std::isfinite(m.valid_loss)) {
      spdlog::error("{}: validation loss diverged at epoch {}", mode_name, epoch);
      result.diverged = true;
      result.log.push_back(std::move(m));
      break;
    }
    record_epoch(std::move(m));
  }
  return result;
}

std::string metrics_jsonl(const std::vector<EpochMetrics>& log) {
  std::string out;
  for (const auto& m : log) {
    nlohmann::json j;
    j["epoch"] = m.epoch;
    j["mode"] = m.mode;
    j["train_loss"] = m.train_loss && std::isfinite(*m.train_loss) ? nlohmann::json(*m.train_loss)
                                                                   : nlohmann::json(nullptr);
    j["valid_loss"] = std::isfinite(m.valid_loss) ? nlohmann::json(m.valid_loss) : nlohmann::json(nullptr);
    if (m.valid_accuracy) j["valid_accuracy"] = *m.valid_accuracy;
    j["skipped"] = m.skipped;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace cascadion
