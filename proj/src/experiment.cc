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

#include "cascadion/experiment.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cascadion/checkpoint.h"
#include "cascadion/common.h"
#include "cascadion/metrics.h"

namespace cascadion {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json stage_json(const StageSettings& s) {
  return {{"epochs", s.epochs},
          {"learning_rate", s.learning_rate},
          {"batch_size", s.batch_size},
          {"label_smoothing", s.label_smoothing}};
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw FormatError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      throw FormatError("config: unknown key '" + key + "' in '" + where + "'");
    }
  }
}

template <typename T>
void take(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

StageSettings stage_from_json(const json& j, StageSettings s, const std::string& where) {
  reject_unknown(j, {"epochs", "learning_rate", "batch_size", "label_smoothing"}, where);
  take(j, "epochs", s.epochs);
  take(j, "learning_rate", s.learning_rate);
  take(j, "batch_size", s.batch_size);
  take(j, "label_smoothing", s.label_smoothing);
  return s;
}

json task_json(const TaskSpec& t) {
  json pairs = json::array();
  for (const auto& [a, b] : t.homophone_pairs) pairs.push_back({a, b});
  return {{"transcript_vocab", t.transcript_vocab},
          {"translation_vocab", t.translation_vocab},
          {"homophone_pairs", pairs},
          {"homophone_rate", t.homophone_rate},
          {"context_agreement", t.context_agreement},
          {"noise", t.noise},
          {"d_feat", t.d_feat},
          {"frames_per_token", t.frames_per_token},
          {"min_len", t.min_len},
          {"max_len", t.max_len},
          {"in_domain_rate", t.in_domain_rate},
          {"style_mismatch", t.style_mismatch},
          {"channel_shift", t.channel_shift},
          {"num_swap_triggers", t.num_swap_triggers}};
}

TaskSpec task_from_json(const json& j) {
  reject_unknown(j,
                 {"transcript_vocab", "translation_vocab", "homophone_pairs", "homophone_rate",
                  "context_agreement", "noise", "d_feat", "frames_per_token", "min_len", "max_len",
                  "in_domain_rate", "style_mismatch", "channel_shift", "num_swap_triggers"},
                 "task");
  TaskSpec t;
  take(j, "transcript_vocab", t.transcript_vocab);
  take(j, "translation_vocab", t.translation_vocab);
  if (j.contains("homophone_pairs")) {
    t.homophone_pairs.clear();
    for (const auto& p : j.at("homophone_pairs")) {
      if (!p.is_array() || p.size() != 2) throw FormatError("config: homophone pairs must be [a, b]");
      t.homophone_pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
  }
  take(j, "homophone_rate", t.homophone_rate);
  take(j, "context_agreement", t.context_agreement);
  take(j, "noise", t.noise);
  take(j, "d_feat", t.d_feat);
  take(j, "frames_per_token", t.frames_per_token);
  take(j, "min_len", t.min_len);
  take(j, "max_len", t.max_len);
  take(j, "in_domain_rate", t.in_domain_rate);
  take(j, "style_mismatch", t.style_mismatch);
  take(j, "channel_shift", t.channel_shift);
  take(j, "num_swap_triggers", t.num_swap_triggers);
  return t;
}

std::string stage_hash(const json& key) { return hex64(fnv1a64(key.dump())); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

struct StageOutput {
  CascadeModels models;
  std::string hash;
};

/// Loads a finished stage or runs `fn` and persists its models.
StageOutput run_stage(const fs::path& root, const std::string& name, const json& key,
                      const Dataset& vocabs, const std::function<TrainResult()>& fn) {
  const std::string hash = stage_hash(key);
  const fs::path dir = root / (name + "-" + hash);
  const fs::path done = dir / "done";
  StageOutput result{{}, hash};
  if (fs::exists(done)) {
    spdlog::info("stage {} cached at {}", name, dir.string());
    if (fs::exists(dir / "asr.ckpt")) {
      result.models.asr = load_checkpoint(dir / "asr.ckpt", std::nullopt, vocabs.transcript_vocab);
    }
    if (fs::exists(dir / "mt.ckpt")) {
      result.models.mt =
          load_checkpoint(dir / "mt.ckpt", vocabs.transcript_vocab, vocabs.translation_vocab);
    }
    return result;
  }
  spdlog::info("stage {} running", name);
  TrainResult trained = fn();
  fs::create_directories(dir);
  write_text(dir / "key.json", key.dump(2) + "\n");
  write_text(dir / "metrics.jsonl", metrics_jsonl(trained.log));
  if (trained.models.asr) save_checkpoint(*trained.models.asr, dir / "asr.ckpt");
  if (trained.models.mt) save_checkpoint(*trained.models.mt, dir / "mt.ckpt");
  write_text(done, "");
  result.models = std::move(trained.models);
  return result;
}

std::vector<Tokens> references(const Dataset& data) {
  std::vector<Tokens> refs;
  refs.reserve(data.size());
  for (const auto& ex : data.examples) refs.push_back(ex.translation);
  return refs;
}

std::vector<Tokens> transcripts(const Dataset& data) {
  std::vector<Tokens> refs;
  refs.reserve(data.size());
  for (const auto& ex : data.examples) refs.push_back(ex.transcript);
  return refs;
}

std::string format_number(double v) { return fmt::format("{:.2f}", v); }

}  // namespace

TrainConfig ExperimentConfig::train_config(TrainMode mode, std::uint64_t seed) const {
  const StageSettings* s = &pretrain_asr;
  switch (mode) {
    case TrainMode::kPretrainAsr: s = &pretrain_asr; break;
    case TrainMode::kPretrainMt: s = &pretrain_mt; break;
    case TrainMode::kFinetuneAsr:
    case TrainMode::kFinetuneMt: s = &finetune; break;
    case TrainMode::kJointTopK:
    case TrainMode::kJointTight: s = &joint; break;
  }
  TrainConfig c;
  c.mode = mode;
  c.learning_rate = s->learning_rate;
  c.label_smoothing = s->label_smoothing;
  c.batch_size = s->batch_size;
  c.epochs = s->epochs;
  c.seed = seed;
  c.beam_size = beam_size;
  c.k = k;
  c.gamma = gamma;
  c.max_len = max_len();
  return c;
}

json ExperimentConfig::to_json() const {
  json sweep = gamma_sweep;
  return {{"task", task_json(task)},
          {"data", {{"n_train", n_train}, {"n_valid", n_valid}, {"n_test", n_test}}},
          {"model", {{"d", d}}},
          {"pretrain_asr", stage_json(pretrain_asr)},
          {"pretrain_mt", stage_json(pretrain_mt)},
          {"finetune", stage_json(finetune)},
          {"joint", stage_json(joint)},
          {"decode",
           {{"beam_size", beam_size},
            {"k", k},
            {"gamma", gamma},
            {"gamma_sweep", sweep},
            {"max_len_slack", max_len_slack}}}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  reject_unknown(j, {"task", "data", "model", "pretrain_asr", "pretrain_mt", "finetune", "joint", "decode"},
                 "config");
  ExperimentConfig c;
  if (j.contains("task")) c.task = task_from_json(j.at("task"));
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d, {"n_train", "n_valid", "n_test"}, "data");
    take(d, "n_train", c.n_train);
    take(d, "n_valid", c.n_valid);
    take(d, "n_test", c.n_test);
  }
  if (j.contains("model")) {
    reject_unknown(j.at("model"), {"d"}, "model");
    take(j.at("model"), "d", c.d);
  }
  if (j.contains("pretrain_asr")) c.pretrain_asr = stage_from_json(j.at("pretrain_asr"), c.pretrain_asr, "pretrain_asr");
  if (j.contains("pretrain_mt")) c.pretrain_mt = stage_from_json(j.at("pretrain_mt"), c.pretrain_mt, "pretrain_mt");
  if (j.contains("finetune")) c.finetune = stage_from_json(j.at("finetune"), c.finetune, "finetune");
  if (j.contains("joint")) c.joint = stage_from_json(j.at("joint"), c.joint, "joint");
  if (j.contains("decode")) {
    const json& d = j.at("decode");
    reject_unknown(d, {"beam_size", "k", "gamma", "gamma_sweep", "max_len_slack"}, "decode");
    take(d, "beam_size", c.beam_size);
    take(d, "k", c.k);
    take(d, "gamma", c.gamma);
    take(d, "gamma_sweep", c.gamma_sweep);
    take(d, "max_len_slack", c.max_len_slack);
  }
  c.task.validate();
  if (c.n_train == 0 || c.n_valid == 0 || c.n_test == 0) throw Error("config: every split needs examples");
  if (c.k < 1 || c.k > c.beam_size) throw Error("config: K must lie in [1, beam_size]");
  if (!(c.gamma > 0.0)) throw Error("config: gamma must be > 0");
  for (double g : c.gamma_sweep) {
    if (!(g > 0.0)) throw Error("config: gamma sweep values must be > 0");
  }
  if (c.max_len_slack < 1) throw Error("config: max_len_slack must be >= 1");
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    return ExperimentConfig::from_json(j);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Report report(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw Error("report: no rows");
  for (const auto& r : rows) {
    if (r.test_split != rows.front().test_split) {
      throw Error("report: rows were evaluated on different test splits (" + hex64(r.test_split) +
                  " vs " + hex64(rows.front().test_split) + ")");
    }
  }
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.system.size());
  std::ostringstream table;
  table << std::left << std::setw(static_cast<int>(width)) << "model" << "  finetuned  "
        << std::right << std::setw(7) << "BLEU" << "  " << std::setw(8) << "WER(ASR)" << "\n";
  json items = json::array();
  for (const auto& r : rows) {
    table << std::left << std::setw(static_cast<int>(width)) << r.system << "  "
          << std::setw(9) << (r.finetuned ? "yes" : "no") << "  " << std::right << std::setw(7)
          << format_number(r.bleu) << "  " << std::setw(8)
          << (r.wer ? format_number(*r.wer * 100.0) : std::string("-")) << "\n";
    json item = {{"model", r.system}, {"finetuned", r.finetuned}, {"bleu", r.bleu}};
    item["wer"] = r.wer ? json(*r.wer) : json(nullptr);
    items.push_back(item);
  }
  return {table.str(), json{{"test_split", hex64(rows.front().test_split)}, {"rows", items}}};
}

const std::vector<std::string>& matrix_systems() {
  static const std::vector<std::string> systems = {"groundtruth-mt", "cascade", "tight",
                                                   "topk-train+search", "topk-search-only"};
  return systems;
}

json MatrixResult::to_json() const {
  json j = report(rows).json;
  j["seed"] = seed;
  json o = json::array();
  for (const auto& r : oracle) {
    o.push_back({{"model", r.system}, {"finetuned", r.finetuned}, {"bleu", r.bleu}});
  }
  j["oracle"] = o;
  json sweep = json::array();
  for (const auto& p : tight_gamma_sweep) {
    sweep.push_back({{"finetuned", p.finetuned}, {"gamma", p.gamma}, {"bleu", p.bleu}});
  }
  j["tight_gamma_sweep"] = sweep;
  return j;
}

std::string MatrixResult::table() const {
  std::vector<ReportRow> all = rows;
  all.insert(all.end(), oracle.begin(), oracle.end());
  return report(all).table;
}

DecodeMode decode_mode_from_string(const std::string& name) {
  if (name == "cascade") return DecodeMode::kCascade;
  if (name == "topk-search") return DecodeMode::kTopKSearch;
  if (name == "tight") return DecodeMode::kTight;
  if (name == "oracle") return DecodeMode::kOracle;
  if (name == "groundtruth-mt") return DecodeMode::kGroundTruthMt;
  throw Error("unknown decode mode '" + name + "'");
}

std::vector<DecodedExample> decode_dataset(DecodeMode mode, const SeqModel& asr, const SeqModel& mt,
                                           const Dataset& data, const DecodeSettings& s) {
  std::vector<DecodedExample> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples) {
    DecodedExample d;
    d.id = ex.id;
    switch (mode) {
      case DecodeMode::kCascade: {
        CascadeResult r = cascade_translate(asr, mt, ex.x, s.asr, s.mt);
        d.transcript = r.transcript.content();
        d.translation = r.translation.content();
        break;
      }
      case DecodeMode::kTopKSearch:
      case DecodeMode::kOracle: {
        TopKSearchResult r = topk_search(asr, mt, ex.x, s.k, s.asr, s.mt);
        std::size_t pick = r.chosen;
        if (mode == DecodeMode::kOracle) {
          std::vector<Tokens> candidates;
          for (const auto& h : r.translations) candidates.push_back(h.content());
          pick = oracle_select(candidates, ex.translation);
        }
        d.transcript = r.transcripts.at(pick).content();
        d.translation = r.translations.at(pick).content();
        break;
      }
      case DecodeMode::kTight: {
        TightResult r = tight_translate(asr, mt, ex.x, s.gamma, s.asr, s.mt);
        d.transcript = r.transcript.content();
        d.translation = r.translation.content();
        break;
      }
      case DecodeMode::kGroundTruthMt: {
        KBestList list = beam_search(mt, TokenSequence(ex.transcript), s.mt);
        d.translation = list.best().content();
        break;
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

MatrixResult run_matrix(const ExperimentConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  const fs::path stages = out_dir / "stages";
  fs::create_directories(stages);
  const json full = config.to_json();
  const json base = {{"task", full["task"]}, {"data", full["data"]}, {"seed", seed}};

  DatasetSplits data = generate_dataset(config.task, config.n_train, config.n_valid, config.n_test, seed);
  const std::uint64_t test_split = data.test.fingerprint();
  {
    const fs::path dir = stages / ("data-" + stage_hash(base));
    if (!fs::exists(dir / "done")) {
      fs::create_directories(dir);
      write_jsonl(data.train, dir / "train.jsonl");
      write_jsonl(data.valid, dir / "valid.jsonl");
      write_jsonl(data.test, dir / "test.jsonl");
      write_text(dir / "done", "");
    }
  }

  const Dataset& vocabs = data.train;
  auto run = [&](TrainMode mode, DomainFilter filter, CascadeModels init) {
    TrainConfig tc = config.train_config(mode, seed);
    tc.domain_filter = filter;
    return [&data, tc, init = std::move(init)]() { return train(tc, data.train, data.valid, init); };
  };

  ModelConfig asr_cfg{ModelKind::kAsr, std::nullopt, data.train.transcript_vocab, config.d,
                      config.task.d_feat};
  ModelConfig mt_cfg{ModelKind::kMt, data.train.transcript_vocab, data.train.translation_vocab,
                     config.d, std::nullopt};

  json k_asr = base;
  k_asr["stage"] = "pretrain-asr";
  k_asr["model"] = full["model"];
  k_asr["settings"] = full["pretrain_asr"];
  StageOutput asr_pre = run_stage(stages, "pretrain-asr", k_asr, vocabs,
                                  run(TrainMode::kPretrainAsr, DomainFilter::kAll,
                                      {init_params(asr_cfg, seed * 2 + 1), std::nullopt}));
  json k_mt = base;
  k_mt["stage"] = "pretrain-mt";
  k_mt["model"] = full["model"];
  k_mt["settings"] = full["pretrain_mt"];
  StageOutput mt_pre = run_stage(stages, "pretrain-mt", k_mt, vocabs,
                                 run(TrainMode::kPretrainMt, DomainFilter::kAll,
                                     {std::nullopt, init_params(mt_cfg, seed * 2 + 2)}));

  json k_asr_ft = {{"stage", "finetune-asr"}, {"parent", asr_pre.hash}, {"seed", seed},
                   {"settings", stage_json(config.finetune)}};
  StageOutput asr_ft = run_stage(stages, "finetune-asr", k_asr_ft, vocabs,
                                 run(TrainMode::kFinetuneAsr, DomainFilter::kInDomain,
                                     {asr_pre.models.asr, std::nullopt}));
  json k_mt_ft = {{"stage", "finetune-mt"}, {"parent", mt_pre.hash}, {"seed", seed},
                  {"settings", stage_json(config.finetune)}};
  StageOutput mt_ft = run_stage(stages, "finetune-mt", k_mt_ft, vocabs,
                                run(TrainMode::kFinetuneMt, DomainFilter::kInDomain,
                                    {std::nullopt, mt_pre.models.mt}));

  const DecodeSettings settings{config.search_options(), config.search_options(), config.k, config.gamma};
  const std::vector<Tokens> refs = references(data.test);
  const std::vector<Tokens> gold_f = transcripts(data.test);

  MatrixResult result;
  result.seed = seed;
  for (bool finetuned : {false, true}) {
    const SeqModel& asr = finetuned ? *asr_ft.models.asr : *asr_pre.models.asr;
    const SeqModel& mt = finetuned ? *mt_ft.models.mt : *mt_pre.models.mt;
    const std::string parent = finetuned ? asr_ft.hash + mt_ft.hash : asr_pre.hash + mt_pre.hash;
    const DomainFilter filter = finetuned ? DomainFilter::kInDomain : DomainFilter::kAll;
    const std::string suffix = finetuned ? "-ft" : "";

    json k_topk = {{"stage", "joint-topk"}, {"parent", parent}, {"seed", seed},
                   {"settings", stage_json(config.joint)}, {"filter", finetuned},
                   {"beam_size", config.beam_size}, {"k", config.k}, {"max_len", config.max_len()}};
    StageOutput topk = run_stage(stages, "joint-topk" + suffix, k_topk, vocabs,
                                 run(TrainMode::kJointTopK, filter, {asr, mt}));
    json k_tight = {{"stage", "joint-tight"}, {"parent", parent}, {"seed", seed},
                    {"settings", stage_json(config.joint)}, {"filter", finetuned},
                    {"gamma", config.gamma}};
    StageOutput tight = run_stage(stages, "joint-tight" + suffix, k_tight, vocabs,
                                  run(TrainMode::kJointTight, filter, {asr, mt}));

    spdlog::info("decoding test split ({} examples, finetuned={})", data.test.size(), finetuned);
    std::vector<Tokens> gt, cascade, cascade_f, topk_only, oracle, tight_e, tight_f, joint_e, joint_f;
    for (const auto& ex : data.test.examples) {
      gt.push_back(beam_search(mt, TokenSequence(ex.transcript), settings.mt).best().content());
      // The first Top-K candidate pair is exactly the cascade output.
      TopKSearchResult r = topk_search(asr, mt, ex.x, config.k, settings.asr, settings.mt);
      cascade.push_back(r.translations.front().content());
      cascade_f.push_back(r.transcripts.front().content());
      topk_only.push_back(r.translation.content());
      std::vector<Tokens> candidates;
      for (const auto& h : r.translations) candidates.push_back(h.content());
      oracle.push_back(candidates[oracle_select(candidates, ex.translation)]);

      TopKSearchResult j = topk_search(*topk.models.asr, *topk.models.mt, ex.x, config.k,
                                       settings.asr, settings.mt);
      joint_e.push_back(j.translation.content());
      joint_f.push_back(j.transcripts.front().content());
      TightResult t = tight_translate(*tight.models.asr, *tight.models.mt, ex.x, config.gamma,
                                      settings.asr, settings.mt);
      tight_e.push_back(t.translation.content());
      tight_f.push_back(t.transcript.content());
    }
    auto row = [&](const std::string& name, const std::vector<Tokens>& hyps,
                   std::optional<std::vector<Tokens>> asr_hyps) {
      ReportRow r{name, finetuned, corpus_bleu(hyps, refs), std::nullopt, test_split};
      if (asr_hyps) r.wer = corpus_wer(*asr_hyps, gold_f);
      return r;
    };
    result.rows.push_back(row("groundtruth-mt", gt, std::nullopt));
    result.rows.push_back(row("cascade", cascade, cascade_f));
    result.rows.push_back(row("tight", tight_e, tight_f));
    result.rows.push_back(row("topk-train+search", joint_e, joint_f));
    result.rows.push_back(row("topk-search-only", topk_only, cascade_f));
    result.oracle.push_back(row("oracle", oracle, std::nullopt));

    for (double g : config.gamma_sweep) {
      std::vector<Tokens> hyps;
      for (const auto& ex : data.test.examples) {
        hyps.push_back(tight_translate(*tight.models.asr, *tight.models.mt, ex.x, g, settings.asr,
                                       settings.mt)
                           .translation.content());
      }
      result.tight_gamma_sweep.push_back({finetuned, g, corpus_bleu(hyps, refs)});
    }
  }
  // Rows ordered system-major to mirror the table layout.
  std::stable_sort(result.rows.begin(), result.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    const auto& s = matrix_systems();
    auto ia = std::find(s.begin(), s.end(), a.system) - s.begin();
    auto ib = std::find(s.begin(), s.end(), b.system) - s.begin();
    return ia < ib;
  });
  return result;
}

}  // namespace cascadion
