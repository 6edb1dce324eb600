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

#ifndef CASCADION_EXPERIMENT_H_
#define CASCADION_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cascadion/search.h"
#include "cascadion/synthdata.h"
#include "cascadion/trainer.h"

namespace cascadion {

struct StageSettings {
  int epochs = 10;
  double learning_rate = 3e-3;
  int batch_size = 16;
  double label_smoothing = 0.1;
};

/// Everything a matrix run depends on besides the seed.
struct ExperimentConfig {
  TaskSpec task;
  std::size_t n_train = 4000;
  std::size_t n_valid = 400;
  std::size_t n_test = 300;
  int d = 32;
  StageSettings pretrain_asr{15, 3e-3, 16, 0.1};
  StageSettings pretrain_mt{15, 3e-3, 16, 0.1};
  StageSettings finetune{5, 3e-4, 16, 0.1};
  StageSettings joint{2, 1e-4, 16, 0.1};
  int beam_size = 12;
  int k = 4;
  double gamma = 1.0;
  std::vector<double> gamma_sweep = {0.5, 1.0, 2.0};
  /// Search limit: longest task sentence plus this slack.
  int max_len_slack = 4;

  int max_len() const { return task.max_len + max_len_slack; }
  SearchOptions search_options() const { return {beam_size, max_len()}; }
  TrainConfig train_config(TrainMode mode, std::uint64_t seed) const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// One evaluated system on one test split.
struct ReportRow {
  std::string system;
  bool finetuned = false;
  double bleu = 0.0;
  std::optional<double> wer;
  std::uint64_t test_split = 0;
};

struct Report {
  std::string table;
  nlohmann::json json;
};

/// Fixed-width table plus a JSON sidecar. Rejects an empty row set and rows
/// evaluated on different test splits.
Report report(const std::vector<ReportRow>& rows);

struct SweepPoint {
  bool finetuned = false;
  double gamma = 1.0;
  double bleu = 0.0;
};

struct MatrixResult {
  std::uint64_t seed = 0;
  std::vector<ReportRow> rows;    // 5 systems x {no fine-tuning, fine-tuned}
  std::vector<ReportRow> oracle;  // sentence-BLEU selection over the Top-K translations
  std::vector<SweepPoint> tight_gamma_sweep;
  nlohmann::json to_json() const;
  std::string table() const;
};

/// Stage outputs below `out_dir`/stages are content-addressed by the hash of
/// everything that determines them and reused when present.
MatrixResult run_matrix(const ExperimentConfig& config, std::uint64_t seed,
                        const std::filesystem::path& out_dir);

/// Canonical names of the system rows, in table order.
const std::vector<std::string>& matrix_systems();

/// Decoding regimes exposed by the CLI.
enum class DecodeMode { kCascade, kTopKSearch, kTight, kOracle, kGroundTruthMt };
DecodeMode decode_mode_from_string(const std::string& name);

struct DecodedExample {
  std::string id;
  std::optional<std::vector<int>> transcript;  // ASR 1-best used, if any
  std::vector<int> translation;
};

struct DecodeSettings {
  SearchOptions asr;
  SearchOptions mt;
  int k = 4;
  double gamma = 1.0;
};

/// Decodes every example of `data`, preserving order.
std::vector<DecodedExample> decode_dataset(DecodeMode mode, const SeqModel& asr, const SeqModel& mt,
                                           const Dataset& data, const DecodeSettings& settings);

}  // namespace cascadion

#endif  // CASCADION_EXPERIMENT_H_
