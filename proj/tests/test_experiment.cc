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

#include <chrono>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "cascadion/checkpoint.h"
#include "cascadion/common.h"
#include "cascadion/experiment.h"
#include "cascadion/metrics.h"

namespace cascadion {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cascadion-experiment-test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.n_train = 120;
  c.n_valid = 30;
  c.n_test = 15;
  c.d = 12;
  c.pretrain_asr = {2, 3e-3, 16, 0.1};
  c.pretrain_mt = {2, 3e-3, 16, 0.1};
  c.finetune = {1, 1e-3, 16, 0.1};
  c.joint = {1, 1e-4, 16, 0.1};
  c.beam_size = 4;
  c.k = 2;
  c.gamma_sweep = {0.5, 2.0};
  return c;
}

fs::path stage_dir(const fs::path& out, const std::string& prefix) {
  for (const auto& entry : fs::directory_iterator(out / "stages")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix + "-", 0) == 0 && name.find('-', prefix.size() + 1) == std::string::npos) {
      return entry.path();
    }
  }
  throw Error("no stage " + prefix);
}

TEST(ExperimentConfig, JsonRoundTrip) {
  ExperimentConfig c = tiny_config();
  c.task.noise = 0.25;
  c.task.homophone_pairs = {{0, 1}, {6, 9}};
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
  EXPECT_EQ(back.max_len(), c.task.max_len + c.max_len_slack);
  const TrainConfig tc = back.train_config(TrainMode::kJointTopK, 9);
  EXPECT_EQ(tc.epochs, 1);
  EXPECT_EQ(tc.learning_rate, 1e-4);
  EXPECT_EQ(tc.k, 2);
  EXPECT_EQ(tc.seed, 9u);
}

TEST(ExperimentConfig, PartialJsonKeepsDefaults) {
  const ExperimentConfig c = ExperimentConfig::from_json(nlohmann::json::parse(R"({"decode": {"k": 3}})"));
  EXPECT_EQ(c.k, 3);
  EXPECT_EQ(c.beam_size, ExperimentConfig{}.beam_size);
  EXPECT_EQ(c.n_train, ExperimentConfig{}.n_train);
}

TEST(ExperimentConfig, RejectsBadFiles) {
  try {
    ExperimentConfig::from_json(nlohmann::json::parse(R"({"decode": {"beam": 3}})"));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown key 'beam'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(R"({"decode": {"k": 50}})")), Error);
  EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(R"({"data": {"n_test": 0}})")), Error);
  const fs::path dir = fresh_dir("config");
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(load_experiment_config(dir / "broken.json"), FormatError);
  EXPECT_THROW(load_experiment_config(dir / "missing.json"), Error);
}

TEST(ExperimentConfig, ShippedDeskConfigMatchesDefaults) {
  const ExperimentConfig desk = load_experiment_config(fs::path(CASCADION_SOURCE_DIR) / "configs/desk.json");
  EXPECT_EQ(desk.to_json().dump(), ExperimentConfig{}.to_json().dump());
}

TEST(Report, TableAndErrors) {
  const std::vector<ReportRow> rows = {{"cascade", false, 40.5, 0.069, 7}, {"tight", true, 39.25, std::nullopt, 7}};
  const Report r = report(rows);
  EXPECT_NE(r.table.find("WER(ASR)"), std::string::npos);
  EXPECT_NE(r.table.find("6.90"), std::string::npos);
  EXPECT_EQ(r.json["rows"].size(), 2u);
  EXPECT_TRUE(r.json["rows"][1]["wer"].is_null());
  EXPECT_THROW(report({}), Error);
  EXPECT_THROW(report({{"cascade", false, 1.0, std::nullopt, 7}, {"tight", false, 1.0, std::nullopt, 8}}),
               Error);
}

TEST(Matrix, DeterministicCachedAndConsistent) {
  const ExperimentConfig c = tiny_config();
  const fs::path a = fresh_dir("a");
  const fs::path b = fresh_dir("b");
  const MatrixResult first = run_matrix(c, 3, a);
  const MatrixResult second = run_matrix(c, 3, b);
  EXPECT_EQ(first.to_json().dump(), second.to_json().dump());

  ASSERT_EQ(first.rows.size(), 2 * matrix_systems().size());
  EXPECT_EQ(first.oracle.size(), 2u);
  EXPECT_EQ(first.tight_gamma_sweep.size(), 4u);
  for (const auto& row : first.rows) {
    EXPECT_GE(row.bleu, 0.0);
    EXPECT_LE(row.bleu, 100.0);
    EXPECT_EQ(row.wer.has_value(), row.system != "groundtruth-mt");
  }
  EXPECT_NE(first.table().find("groundtruth-mt"), std::string::npos);

  const auto start = std::chrono::steady_clock::now();
  const MatrixResult cached = run_matrix(c, 3, a);
  const double cached_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(cached.to_json().dump(), first.to_json().dump());
  EXPECT_LT(cached_seconds, 5.0);

  // A changed joint learning rate reuses the pretrained and fine-tuned stages.
  ExperimentConfig changed = c;
  changed.joint.learning_rate = 2e-4;
  const auto before = std::distance(fs::directory_iterator(a / "stages"), fs::directory_iterator());
  run_matrix(changed, 3, a);
  const auto after = std::distance(fs::directory_iterator(a / "stages"), fs::directory_iterator());
  EXPECT_EQ(after - before, 4);

  // The cascade row equals an independent decode of the cached checkpoints.
  const DatasetSplits data = generate_dataset(c.task, c.n_train, c.n_valid, c.n_test, 3);
  const SeqModel asr = load_checkpoint(stage_dir(a, "pretrain-asr") / "asr.ckpt");
  const SeqModel mt = load_checkpoint(stage_dir(a, "pretrain-mt") / "mt.ckpt");
  const DecodeSettings settings{c.search_options(), c.search_options(), c.k, c.gamma};
  std::vector<Tokens> hyps, refs, f_hyps, f_refs;
  for (const auto& d : decode_dataset(DecodeMode::kCascade, asr, mt, data.test, settings)) {
    hyps.push_back(d.translation);
    f_hyps.push_back(*d.transcript);
  }
  for (const auto& ex : data.test.examples) {
    refs.push_back(ex.translation);
    f_refs.push_back(ex.transcript);
  }
  const ReportRow& cascade = first.rows[2];
  ASSERT_EQ(cascade.system, "cascade");
  ASSERT_FALSE(cascade.finetuned);
  EXPECT_EQ(cascade.bleu, corpus_bleu(hyps, refs));
  EXPECT_EQ(*cascade.wer, corpus_wer(f_hyps, f_refs));
}

TEST(DecodeDataset, ModesAgreeWithSearch) {
  const ExperimentConfig c = tiny_config();
  const DatasetSplits data = generate_dataset(c.task, 10, 5, 6, 4);
  const SeqModel asr =
      init_params({ModelKind::kAsr, std::nullopt, data.train.transcript_vocab, 8, c.task.d_feat}, 1);
  const SeqModel mt =
      init_params({ModelKind::kMt, data.train.transcript_vocab, data.train.translation_vocab, 8, std::nullopt}, 2);
  const DecodeSettings s{c.search_options(), c.search_options(), 3, 1.0};
  const auto cascade = decode_dataset(DecodeMode::kCascade, asr, mt, data.test, s);
  const auto topk = decode_dataset(DecodeMode::kTopKSearch, asr, mt, data.test, s);
  const auto oracle = decode_dataset(DecodeMode::kOracle, asr, mt, data.test, s);
  const auto gt = decode_dataset(DecodeMode::kGroundTruthMt, asr, mt, data.test, s);
  const auto tight = decode_dataset(DecodeMode::kTight, asr, mt, data.test, s);
  ASSERT_EQ(cascade.size(), data.test.size());
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const auto& ex = data.test.examples[i];
    EXPECT_EQ(cascade[i].id, ex.id);
    const CascadeResult r = cascade_translate(asr, mt, ex.x, s.asr, s.mt);
    EXPECT_EQ(cascade[i].translation, r.translation.content());
    EXPECT_EQ(tight[i].transcript, cascade[i].transcript);
    EXPECT_EQ(topk[i].translation, topk_search(asr, mt, ex.x, 3, s.asr, s.mt).translation.content());
    EXPECT_GE(sentence_bleu(oracle[i].translation, ex.translation),
              sentence_bleu(topk[i].translation, ex.translation));
    EXPECT_FALSE(gt[i].transcript.has_value());
  }
  EXPECT_EQ(decode_mode_from_string("topk-search"), DecodeMode::kTopKSearch);
  EXPECT_THROW(decode_mode_from_string("greedy"), Error);
}

}  // namespace
}  // namespace cascadion
