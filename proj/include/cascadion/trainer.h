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

#ifndef CASCADION_TRAINER_H_
#define CASCADION_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cascadion/adam.h"
#include "cascadion/model.h"
#include "cascadion/synthdata.h"

namespace cascadion {

enum class TrainMode { kPretrainAsr, kPretrainMt, kFinetuneAsr, kFinetuneMt, kJointTopK, kJointTight };

std::string_view to_string(TrainMode mode);
TrainMode train_mode_from_string(std::string_view name);

enum class DomainFilter { kAll, kInDomain };

struct TrainConfig {
  TrainMode mode = TrainMode::kPretrainAsr;
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double label_smoothing = 0.1;
  int batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 1;
  /// joint-topk: ASR beam size N and list size K.
  int beam_size = 12;
  int k = 4;
  /// joint-tight: posterior sharpness.
  double gamma = 1.0;
  DomainFilter domain_filter = DomainFilter::kAll;
  /// Search length limit for hypothesis generation.
  int max_len = 16;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

struct CascadeModels {
  std::optional<SeqModel> asr;
  std::optional<SeqModel> mt;
};

struct EpochMetrics {
  int epoch = 0;
  std::string mode;
  std::optional<double> train_loss;  // absent for epoch 0 (initial parameters)
  double valid_loss = 0.0;
  std::optional<double> valid_accuracy;
  std::size_t skipped = 0;
  std::size_t rejected_steps = 0;
};

struct TrainResult {
  CascadeModels models;  // parameters of the best validation epoch
  std::vector<EpochMetrics> log;
  int best_epoch = 0;
  bool diverged = false;
  std::size_t skipped_examples = 0;
};

/// Epoch loop with seeded shuffling and minibatch Adam. Epoch 0 scores the
/// initial parameters, so a run never returns something worse on validation
/// than what it started from. For joint-topk the ASR K-best lists are
/// regenerated once per epoch; examples whose hypotheses are all truncated are
/// skipped and counted. A non-finite validation loss stops training and
/// returns the best parameters seen so far with `diverged` set.
TrainResult train(const TrainConfig& config, const Dataset& train_data, const Dataset& valid_data,
                  CascadeModels initial);

/// Mean per-example validation loss and teacher-forced token accuracy.
struct ValidationScore {
  double loss = 0.0;
  std::optional<double> accuracy;
};
ValidationScore validate_models(const TrainConfig& config, const CascadeModels& models,
                                const Dataset& data);

/// One line per epoch: {"epoch", "mode", "train_loss", "valid_loss", ...}.
std::string metrics_jsonl(const std::vector<EpochMetrics>& log);

}  // namespace cascadion

#endif  // CASCADION_TRAINER_H_
