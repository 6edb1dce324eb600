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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cascadion/checkpoint.h"
#include "cascadion/common.h"
#include "cascadion/experiment.h"
#include "cascadion/metrics.h"
#include "cascadion/search.h"
#include "cascadion/synthdata.h"
#include "cascadion/trainer.h"

namespace fs = std::filesystem;
using namespace cascadion;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  std::string out = "out";
};

ExperimentConfig load_config(const Common& c) {
  return c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

Dataset load_split(const ExperimentConfig& cfg, const fs::path& path) {
  return read_jsonl(path, transcript_vocabulary(cfg.task), translation_vocabulary(cfg.task));
}

void set_log_level() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CASCADION_LOG")) {
    const std::string level = env;
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else throw Error("CASCADION_LOG must be one of error, info, debug");
  }
}

void cmd_gen_data(const Common& c) {
  const ExperimentConfig cfg = load_config(c);
  DatasetSplits s = generate_dataset(cfg.task, cfg.n_train, cfg.n_valid, cfg.n_test, c.seed);
  const fs::path dir = fs::path(c.out) / "data";
  fs::create_directories(dir);
  write_jsonl(s.train, dir / "train.jsonl");
  write_jsonl(s.valid, dir / "valid.jsonl");
  write_jsonl(s.test, dir / "test.jsonl");
  std::cout << "wrote " << s.train.size() << "/" << s.valid.size() << "/" << s.test.size()
            << " examples to " << dir.string() << "\n";
}

struct TrainArgs {
  std::string mode;
  std::string asr, mt, data;
  bool in_domain = false;
};

void cmd_train(const Common& c, const TrainArgs& a) {
  const ExperimentConfig cfg = load_config(c);
  const TrainMode mode = train_mode_from_string(a.mode);
  const fs::path data_dir = a.data.empty() ? fs::path(c.out) / "data" : fs::path(a.data);
  Dataset train_data = load_split(cfg, data_dir / "train.jsonl");
  Dataset valid_data = load_split(cfg, data_dir / "valid.jsonl");
  const Vocabulary& fv = train_data.transcript_vocab;
  const Vocabulary& ev = train_data.translation_vocab;

  CascadeModels init;
  const bool needs_asr = mode != TrainMode::kPretrainMt && mode != TrainMode::kFinetuneMt;
  const bool needs_mt = mode != TrainMode::kPretrainAsr && mode != TrainMode::kFinetuneAsr;
  if (needs_asr) {
    if (!a.asr.empty()) init.asr = load_checkpoint(a.asr, std::nullopt, fv);
    else if (mode == TrainMode::kPretrainAsr)
      init.asr = init_params({ModelKind::kAsr, std::nullopt, fv, cfg.d, cfg.task.d_feat}, c.seed * 2 + 1);
    else throw Error(std::string(to_string(mode)) + " needs --asr");
  }
  if (needs_mt) {
    if (!a.mt.empty()) init.mt = load_checkpoint(a.mt, fv, ev);
    else if (mode == TrainMode::kPretrainMt)
      init.mt = init_params({ModelKind::kMt, fv, ev, cfg.d, std::nullopt}, c.seed * 2 + 2);
    else throw Error(std::string(to_string(mode)) + " needs --mt");
  }
  TrainConfig tc = cfg.train_config(mode, c.seed);
  const bool finetune = mode == TrainMode::kFinetuneAsr || mode == TrainMode::kFinetuneMt;
  tc.domain_filter = (finetune || a.in_domain) ? DomainFilter::kInDomain : DomainFilter::kAll;
  TrainResult r = train(tc, train_data, valid_data, std::move(init));
  const fs::path dir = fs::path(c.out) / std::string(to_string(mode));
  fs::create_directories(dir);
  if (r.models.asr) save_checkpoint(*r.models.asr, dir / "asr.ckpt");
  if (r.models.mt) save_checkpoint(*r.models.mt, dir / "mt.ckpt");
  write_file(dir / "metrics.jsonl", metrics_jsonl(r.log));
  std::cout << "best epoch " << r.best_epoch << (r.diverged ? " (diverged)" : "") << ", wrote "
            << dir.string() << "\n";
}

struct DecodeArgs {
  std::string mode = "cascade";
  std::string asr, mt, data, kbest;
  int n = 12;
  int k = 4;
  std::optional<double> gamma;
};

void cmd_decode(const Common& c, const DecodeArgs& a) {
  const ExperimentConfig cfg = load_config(c);
  const DecodeMode mode = decode_mode_from_string(a.mode);
  const fs::path data_path = a.data.empty() ? fs::path(c.out) / "data" / "test.jsonl" : fs::path(a.data);
  Dataset data = load_split(cfg, data_path);
  const Vocabulary& fv = data.transcript_vocab;
  if (a.mt.empty()) throw Error("decode needs --mt");
  SeqModel mt = load_checkpoint(a.mt, fv, data.translation_vocab);
  std::optional<SeqModel> asr;
  if (mode != DecodeMode::kGroundTruthMt) {
    if (a.asr.empty()) throw Error("decode mode '" + a.mode + "' needs --asr");
    asr = load_checkpoint(a.asr, std::nullopt, fv);
  }
  if (a.k < 1 || a.k > a.n) throw Error("--K must lie in [1, N]");
  DecodeSettings s{{a.n, cfg.max_len()}, {a.n, cfg.max_len()}, a.k, a.gamma.value_or(cfg.gamma)};
  std::vector<DecodedExample> decoded = decode_dataset(mode, asr ? *asr : mt, mt, data, s);

  std::string lines;
  for (const auto& d : decoded) {
    nlohmann::json j = {{"id", d.id}, {"translation", data.translation_vocab.decode(d.translation)}};
    if (d.transcript) j["transcript"] = fv.decode(*d.transcript);
    lines += j.dump() + "\n";
  }
  const fs::path out = fs::path(c.out) / ("decode-" + a.mode + ".jsonl");
  write_file(out, lines);
  if (!a.kbest.empty() && asr) {
    std::ofstream kb(a.kbest);
    if (!kb) throw Error("cannot write " + a.kbest);
    for (const auto& ex : data.examples) {
      write_kbest_jsonl(kb, ex.id, beam_search(*asr, ex.x, s.asr), fv);
    }
  }
  std::cout << "wrote " << decoded.size() << " translations to " << out.string() << "\n";
}

struct EvalArgs {
  std::string hyps, data;
};

void cmd_evaluate(const Common& c, const EvalArgs& a) {
  const ExperimentConfig cfg = load_config(c);
  Dataset data = load_split(cfg, a.data);
  std::ifstream in(a.hyps);
  if (!in) throw Error("cannot open " + a.hyps);
  std::map<std::string, nlohmann::json> by_id;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      by_id[j.at("id").get<std::string>()] = j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(a.hyps + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  std::vector<Tokens> hyps, refs, asr_hyps, asr_refs;
  for (const auto& ex : data.examples) {
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) throw Error("no hypothesis for example " + ex.id);
    hyps.push_back(data.translation_vocab.encode(it->second.at("translation").get<std::vector<std::string>>()));
    refs.push_back(ex.translation);
    if (it->second.contains("transcript")) {
      asr_hyps.push_back(data.transcript_vocab.encode(it->second.at("transcript").get<std::vector<std::string>>()));
      asr_refs.push_back(ex.transcript);
    }
  }
  MetricReport r = evaluate_translations(hyps, refs);
  if (!asr_hyps.empty()) {
    if (asr_hyps.size() != hyps.size()) throw Error("transcripts present for only some examples");
    r.wer = corpus_wer(asr_hyps, asr_refs);
  }
  std::cout << r.to_json() << "\n";
}

void cmd_matrix(const Common& c) {
  const ExperimentConfig cfg = load_config(c);
  MatrixResult m = run_matrix(cfg, c.seed, c.out);
  const std::string stem = "matrix-seed" + std::to_string(c.seed);
  const std::string table = m.table();
  write_file(fs::path(c.out) / (stem + ".json"), m.to_json().dump(2) + "\n");
  write_file(fs::path(c.out) / (stem + ".txt"), table);
  std::cout << table;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascaded speech translation on synthetic homophone data"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "experiment config (JSON)");
    sub->add_option("--seed", common.seed, "random seed");
    sub->add_option("--out", common.out, "output directory");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate train/valid/test splits");
  add_common(gen);

  TrainArgs ta;
  CLI::App* tr = app.add_subcommand("train", "train or fine-tune models");
  add_common(tr);
  tr->add_option("--mode", ta.mode, "pretrain-asr | pretrain-mt | finetune-asr | finetune-mt | joint-topk | joint-tight")
      ->required();
  tr->add_option("--asr", ta.asr, "initial ASR checkpoint");
  tr->add_option("--mt", ta.mt, "initial MT checkpoint");
  tr->add_option("--data", ta.data, "directory with train.jsonl and valid.jsonl");
  tr->add_flag("--in-domain", ta.in_domain, "train on in-domain examples only");

  DecodeArgs da;
  CLI::App* de = app.add_subcommand("decode", "translate a split");
  add_common(de);
  de->add_option("--mode", da.mode, "cascade | topk-search | tight | oracle | groundtruth-mt");
  de->add_option("--asr", da.asr, "ASR checkpoint");
  de->add_option("--mt", da.mt, "MT checkpoint");
  de->add_option("--data", da.data, "split to decode (JSONL)");
  de->add_option("--N", da.n, "beam size");
  de->add_option("--K", da.k, "transcripts kept for Top-K search");
  de->add_option("--gamma", da.gamma, "posterior sharpness for tight decoding");
  de->add_option("--kbest", da.kbest, "also dump ASR K-best lists here");

  EvalArgs ea;
  CLI::App* ev = app.add_subcommand("evaluate", "score translations against references");
  add_common(ev);
  ev->add_option("--hyps", ea.hyps, "decode output (JSONL)")->required();
  ev->add_option("--data", ea.data, "reference split (JSONL)")->required();

  CLI::App* mx = app.add_subcommand("matrix", "run the full comparison grid");
  add_common(mx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    set_log_level();
    if (gen->parsed()) cmd_gen_data(common);
    else if (tr->parsed()) cmd_train(common, ta);
    else if (de->parsed()) cmd_decode(common, da);
    else if (ev->parsed()) cmd_evaluate(common, ea);
    else if (mx->parsed()) cmd_matrix(common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
