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

// Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.
//
// usage: acceptance <cascadion binary> <experiment config> <work dir> [criteria...]

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <fmt/core.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cascadion/checkpoint.h"
#include "cascadion/common.h"
#include "cascadion/experiment.h"
#include "cascadion/grad_check.h"
#include "cascadion/losses.h"
#include "cascadion/metrics.h"
#include "cascadion/search.h"
#include "cascadion/synthdata.h"
#include "cascadion/trainer.h"
#include "reference_model.h"
#include "test_support.h"

namespace cascadion {
namespace {

namespace fs = std::filesystem;
namespace ref = testing::reference;
using testing::random_asr;
using testing::random_frames;
using testing::random_mt;
using testing::random_tokens;
using testing::scaled;
using testing::small_vocab;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Context {
  fs::path cli;
  fs::path config;
  fs::path work;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Outcome gradients(const Context&) {
  Clock clock;
  const Vocabulary vf = small_vocab(10, "f");
  const Vocabulary ve = small_vocab(10, "e");
  std::map<std::string, double> worst = {{"ce", 0.0}, {"topk", 0.0}, {"tight", 0.0}};
  std::vector<std::string> failures;
  const int seeds = 20;
  for (int seed = 1; seed <= seeds; ++seed) {
    std::mt19937_64 rng(seed);
    const SeqModel asr = scaled(random_asr(vf, 8, 4, seed), 2.0);
    const SeqModel mt = scaled(random_mt(vf, ve, 8, seed + 1000), 2.0);
    const AcousticSequence x = random_frames(9, 4, rng);
    const std::vector<int> f = random_tokens(3, 10, rng);
    const auto hyps = topk_transcripts(asr, x, 4, 2, 6);
    std::vector<int> e = beam_search(mt, mt_source(hyps[0]), {4, 6}).best().content();
    if (e.empty()) e = {Vocabulary::kNumReserved};

    std::vector<Tensor> params = asr.tensors();
    params.insert(params.end(), mt.tensors().begin(), mt.tensors().end());
    const std::size_t na = asr.tensors().size();
    const std::map<std::string, LossBuilder> losses = {
        {"ce",
         [&](std::span<const Var> v) {
           BoundModel m(mt, v.subspan(na));
           return label_smoothed_ce(m, encode_tokens(m, f), e, 0.1);
         }},
        {"topk",
         [&](std::span<const Var> v) {
           BoundModel a(asr, v.subspan(0, na));
           BoundModel m(mt, v.subspan(na));
           return topk_objective(a, m, x, e, hyps).loss;
         }},
        {"tight",
         [&](std::span<const Var> v) {
           BoundModel a(asr, v.subspan(0, na));
           BoundModel m(mt, v.subspan(na));
           return tight_objective(a, m, x, f, e, 1.0, 0.1);
         }},
    };
    for (const auto& [name, fn] : losses) {
      const GradCheckResult r = grad_check_detailed(fn, params, 1e-3);
      worst[name] = std::max(worst[name], r.max_relative_error);
      if (!(r.max_relative_error < 1e-5)) {
        failures.push_back(fmt::format("{} seed {} err {:.2e} (analytic {:.3e}, numeric {:.3e})", name, seed,
                                       r.max_relative_error, r.worst_analytic, r.worst_numeric));
      }
    }
  }
  const double elapsed = clock.seconds();
  Outcome o;
  o.pass = failures.empty() && elapsed < 120.0;
  o.detail = fmt::format("{} seeds, max rel err ce {:.2e} topk {:.2e} tight {:.2e}, {:.1f}s", seeds,
                         worst["ce"], worst["topk"], worst["tight"], elapsed);
  for (const auto& f : failures) o.detail += "; " + f;
  return o;
}

Outcome search_exactness(const Context&) {
  Clock clock;
  // Four content tokens plus EOS: five emittable symbols.
  const Vocabulary v = small_vocab(8, "t");
  int matches = 0;
  const int models = 100;
  for (int seed = 1; seed <= models; ++seed) {
    std::mt19937_64 rng(seed);
    const SeqModel mt = scaled(random_mt(v, v, 6, seed), 3.0);
    const std::vector<int> src = random_tokens(3, v.size(), rng);
    const KBestList list = beam_search(mt, TokenSequence(src), {625, 4});
    const ref::Scored want = ref::brute_force_best(mt, ref::encode_tokens(mt, src), 4);
    matches += list.best().content() == want.content;
  }
  const double elapsed = clock.seconds();
  return {matches == models && elapsed < 60.0,
          fmt::format("{}/{} models match brute force, {:.1f}s", matches, models, elapsed)};
}

struct ToyModels {
  DatasetSplits data;
  SeqModel asr;
  SeqModel mt;
};

ToyModels trained_toy_models() {
  ToyModels t;
  TaskSpec spec;
  t.data = generate_dataset(spec, 2000, 60, 100, 77);
  const SeqModel asr = init_params({ModelKind::kAsr, std::nullopt, transcript_vocabulary(spec), 24, spec.d_feat}, 3);
  const SeqModel mt = init_params(
      {ModelKind::kMt, transcript_vocabulary(spec), translation_vocabulary(spec), 24, std::nullopt}, 4);
  TrainConfig c;
  c.epochs = 10;
  c.max_len = spec.max_len + 4;
  c.mode = TrainMode::kPretrainAsr;
  t.asr = *train(c, t.data.train, t.data.valid, {asr, std::nullopt}).models.asr;
  c.mode = TrainMode::kPretrainMt;
  t.mt = *train(c, t.data.train, t.data.valid, {std::nullopt, mt}).models.mt;
  return t;
}

Outcome reductions(const Context&) {
  std::vector<std::string> problems;
  const Vocabulary vf = small_vocab(9, "f");
  const Vocabulary ve = small_vocab(9, "e");

  int same = 0;
  for (int seed = 1; seed <= 50; ++seed) {
    std::mt19937_64 rng(seed);
    const SeqModel asr = scaled(random_asr(vf, 6, 3, seed), 2.0);
    const SeqModel mt = scaled(random_mt(vf, ve, 6, seed + 500), 2.0);
    const AcousticSequence x = random_frames(6, 3, rng);
    const CascadeResult c = cascade_translate(asr, mt, x, {4, 6}, {4, 6});
    const TopKSearchResult t = topk_search(asr, mt, x, 1, {4, 6}, {4, 6});
    same += c.translation.tokens == t.translation.tokens && c.transcript.tokens == t.transcripts[0].tokens;
  }
  if (same != 50) problems.push_back(fmt::format("topk_search K=1 differs on {} models", 50 - same));

  double worst_loss = 0.0;
  for (int seed = 1; seed <= 50; ++seed) {
    std::mt19937_64 rng(seed);
    const SeqModel asr = scaled(random_asr(vf, 6, 3, seed), 2.0);
    const SeqModel mt = scaled(random_mt(vf, ve, 6, seed + 500), 2.0);
    const AcousticSequence x = random_frames(6, 3, rng);
    const std::vector<int> e = random_tokens(4, ve.size(), rng);
    const auto hyps = topk_transcripts(asr, x, 4, 1, 6);
    const double topk = topk_train_loss(asr, mt, x, e, hyps).loss;
    const double ce = label_smoothed_ce(mt, Source{mt_source(hyps[0])}, e, 0.0, Reduction::kSum).loss;
    worst_loss = std::max(worst_loss, std::abs(topk - ce));
  }
  if (!(worst_loss <= 1e-12)) problems.push_back(fmt::format("K=1 loss gap {:.2e}", worst_loss));

  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 3.0);
  int identical = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> logits(1 + trial % 12);
    for (double& l : logits) l = normal(rng);
    const Tensor p = softmax(constant(Tensor::vector(logits))).value();
    const std::vector<double> row(p.values().begin(), p.values().end());
    const std::vector<double> out = sharpen(row, 1.0);
    identical += std::memcmp(out.data(), row.data(), row.size() * sizeof(double)) == 0;
  }
  if (identical != 1000) problems.push_back(fmt::format("gamma=1 changed {} distributions", 1000 - identical));

  const ToyModels toy = trained_toy_models();
  const SearchOptions opts{12, 12};
  // Eligible: at every position the transcript token is the posterior argmax,
  // ahead of the runner-up by at least 0.01.
  int eligible = 0, agree = 0, off_argmax = 0, off_argmax_agree = 0;
  for (const auto& ex : toy.data.test.examples) {
    const CascadeResult c = cascade_translate(toy.asr, toy.mt, ex.x, opts, opts);
    const std::vector<int> f = c.transcript.content();
    if (f.empty()) continue;
    BoundModel b(toy.asr, nullptr);
    const Tensor post = sharpened_posteriors(b, encode_frames(b, ex.x), f, 1.0).value();
    bool separated = true, on_argmax = true;
    for (std::size_t j = 0; j < post.rows(); ++j) {
      std::vector<double> row(post.row(j).begin(), post.row(j).end());
      const double chosen = row[f[j]];
      std::partial_sort(row.begin(), row.begin() + 2, row.end(), std::greater<>());
      separated = separated && row[0] - row[1] >= 0.01;
      on_argmax = on_argmax && chosen == row[0];
    }
    if (!separated) continue;
    const TightResult t = tight_translate(toy.asr, toy.mt, ex.x, 1e4, opts, opts);
    const bool same_output = t.translation.tokens == c.translation.tokens;
    if (on_argmax) {
      ++eligible;
      agree += same_output;
    } else {
      ++off_argmax;
      off_argmax_agree += same_output;
    }
  }
  if (eligible == 0 || agree != eligible) {
    problems.push_back(fmt::format("gamma=1e4 tight matches cascade on {}/{}", agree, eligible));
  }

  Outcome o;
  o.pass = problems.empty();
  o.detail = fmt::format("K=1 search 50/50 models: {}, K=1 loss gap {:.1e}, gamma=1 identity {}/1000, "
                         "gamma=1e4 tight == cascade on {}/{} separated test inputs ({} more separated inputs "
                         "whose transcript leaves the posterior argmax: {} agree)",
                         same == 50 ? "same" : "differs", worst_loss, identical, agree, eligible, off_argmax,
                         off_argmax_agree);
  for (const auto& p : problems) o.detail += "; " + p;
  return o;
}

Hypothesis scored(std::vector<int> content, double norm) {
  Hypothesis h;
  h.tokens = {Vocabulary::kBos};
  h.tokens.insert(h.tokens.end(), content.begin(), content.end());
  h.tokens.push_back(Vocabulary::kEos);
  h.norm_logprob = norm;
  h.sum_logprob = norm * static_cast<double>(h.emitted_length());
  return h;
}

Outcome topk_weights(const Context&) {
  std::vector<std::string> problems;
  KBestList hand;
  hand.hyps = {scored({4}, std::log(0.6)), scored({5}, std::log(0.2))};
  const TopKWeights w = renormalize_topk(hand, 2);
  const double hand_err = std::max(std::abs(w.probs[0] - 0.75), std::abs(w.probs[1] - 0.25));
  if (!(hand_err <= 1e-12)) problems.push_back(fmt::format("hand case off by {:.2e}", hand_err));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> score(-40.0, 0.0);
  double worst_sum = 0.0;
  int order_violations = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    KBestList list;
    for (int i = 0; i < 10; ++i) list.hyps.push_back(scored({4 + i}, score(rng)));
    std::sort(list.hyps.begin(), list.hyps.end(), ranks_before);
    const TopKWeights t = renormalize_topk(list, 1 + trial % 10);
    double total = 0.0;
    for (std::size_t k = 0; k < t.probs.size(); ++k) {
      total += t.probs[k];
      for (std::size_t l = 0; l < t.probs.size(); ++l) {
        if (list.hyps[k].norm_logprob > list.hyps[l].norm_logprob && !(t.probs[k] >= t.probs[l])) {
          ++order_violations;
        }
      }
    }
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
  }
  if (!(worst_sum <= 1e-9)) problems.push_back(fmt::format("sum off by {:.2e}", worst_sum));
  if (order_violations) problems.push_back(fmt::format("{} ranking violations", order_violations));
  Outcome o;
  o.pass = problems.empty();
  o.detail = fmt::format("(0.6, 0.2) -> ({:.15f}, {:.15f}), 2000 lists max |sum-1| {:.1e}, {} ranking violations",
                         w.probs[0], w.probs[1], worst_sum, order_violations);
  for (const auto& p : problems) o.detail += "; " + p;
  return o;
}

Outcome metric_fixtures(const Context&) {
  std::vector<std::string> problems;
  const Tokens ref_tokens = {4, 5, 6, 7, 8};
  if (sentence_bleu(ref_tokens, ref_tokens) != 100.0) problems.push_back("identity BLEU is not 100");
  if (sentence_bleu(Tokens{}, ref_tokens) != 0.0) problems.push_back("empty BLEU is not 0");
  const double w = wer(Tokens{4, 9, 6}, Tokens{4, 5, 6});
  if (std::abs(w - 1.0 / 3.0) > 1e-15) problems.push_back(fmt::format("single substitution WER {}", w));

  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(1, 10), len(0, 9), tok(4, 10);
  int violations = 0;
  for (int set = 0; set < 1000; ++set) {
    Tokens reference(1 + len(rng));
    for (int& t : reference) t = tok(rng);
    std::vector<Tokens> candidates(count(rng));
    for (auto& c : candidates) {
      c.resize(len(rng));
      for (int& t : c) t = tok(rng);
    }
    const double chosen = sentence_bleu(candidates[oracle_select(candidates, reference)], reference);
    for (const auto& c : candidates) violations += sentence_bleu(c, reference) > chosen;
  }
  if (violations) problems.push_back(fmt::format("oracle_select dominated {} times", violations));
  Outcome o;
  o.pass = problems.empty();
  o.detail = fmt::format("BLEU identity {:.0f}, empty {:.0f}, WER {:.6f}, oracle dominance violations {}/1000 sets",
                         sentence_bleu(ref_tokens, ref_tokens), sentence_bleu(Tokens{}, ref_tokens), w, violations);
  for (const auto& p : problems) o.detail += "; " + p;
  return o;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs `matrix` through the command-line tool in a fresh directory and returns its wall time.
double run_cli_matrix(const Context& ctx, const fs::path& out, int seed) {
  fs::remove_all(out);
  fs::create_directories(out);
  const std::string cmd = fmt::format("'{}' matrix --config '{}' --seed {} --out '{}' > '{}' 2>&1", ctx.cli.string(),
                                      ctx.config.string(), seed, out.string(), (out / "stdout.txt").string());
  Clock clock;
  const int status = std::system(cmd.c_str());
  if (status != 0) throw Error(fmt::format("matrix seed {} failed ({}): see {}", seed, status, (out / "stdout.txt").string()));
  return clock.seconds();
}

double bleu_of(const nlohmann::json& report, const std::string& system, bool finetuned) {
  for (const auto* section : {&report["rows"], &report["oracle"]}) {
    for (const auto& row : *section) {
      if (row["model"] == system && row["finetuned"] == finetuned) return row["bleu"].get<double>();
    }
  }
  throw Error("report lacks " + system);
}

std::map<int, double> g_matrix_seconds;

fs::path matrix_dir(const Context& ctx, int seed) { return ctx.work / fmt::format("matrix-seed{}", seed); }

Outcome replication(const Context& ctx) {
  const std::vector<int> seeds = {1, 2, 3};
  std::map<std::string, double> mean;
  const std::vector<std::pair<std::string, bool>> cells = {
      {"cascade", false},          {"cascade", true},          {"topk-search-only", false},
      {"topk-search-only", true},  {"oracle", false},          {"oracle", true},
      {"topk-train+search", true}, {"tight", true}};
  double slowest = 0.0;
  for (int seed : seeds) {
    const fs::path out = matrix_dir(ctx, seed);
    g_matrix_seconds[seed] = run_cli_matrix(ctx, out, seed);
    slowest = std::max(slowest, g_matrix_seconds[seed]);
    const auto report = nlohmann::json::parse(slurp(out / fmt::format("matrix-seed{}.json", seed)));
    for (const auto& [system, ft] : cells) {
      mean[system + (ft ? "/ft" : "")] += bleu_of(report, system, ft) / static_cast<double>(seeds.size());
    }
    std::cout << "  seed " << seed << fmt::format(" ({:.0f}s)\n", g_matrix_seconds[seed]) << slurp(out / "stdout.txt");
  }
  std::vector<std::string> problems;
  for (const std::string ft : {"", "/ft"}) {
    const double oracle = mean["oracle" + ft], topk = mean["topk-search-only" + ft], cascade = mean["cascade" + ft];
    if (!(oracle >= topk && topk >= cascade)) {
      problems.push_back(fmt::format("5a{}: oracle {:.2f} >= topk-search {:.2f} >= cascade {:.2f} does not hold",
                                     ft.empty() ? "" : " (fine-tuned)", oracle, topk, cascade));
    }
  }
  if (!(mean["cascade/ft"] > mean["cascade"])) {
    problems.push_back(fmt::format("5b: fine-tuned cascade {:.2f} <= cascade {:.2f}", mean["cascade/ft"], mean["cascade"]));
  }
  if (!(slowest < 1800.0)) problems.push_back(fmt::format("slowest pipeline {:.0f}s", slowest));
  const double d_topk = mean["topk-train+search/ft"] - mean["cascade/ft"];
  const double d_tight = mean["tight/ft"] - mean["cascade/ft"];
  Outcome o;
  o.pass = problems.empty();
  o.detail = fmt::format(
      "mean BLEU over 3 seeds: oracle {:.2f} / topk-search {:.2f} / cascade {:.2f}; fine-tuned oracle {:.2f} / "
      "topk-search {:.2f} / cascade {:.2f}; 5c (report only) joint-topk {:+.2f}, joint-tight {:+.2f} vs fine-tuned "
      "cascade, {} within 1 BLEU; slowest pipeline {:.0f}s",
      mean["oracle"], mean["topk-search-only"], mean["cascade"], mean["oracle/ft"], mean["topk-search-only/ft"],
      mean["cascade/ft"], d_topk, d_tight, std::abs(d_topk) <= 1.0 && std::abs(d_tight) <= 1.0 ? "both" : "not both",
      slowest);
  for (const auto& p : problems) o.detail += "; " + p;
  return o;
}

Outcome determinism(const Context& ctx) {
  std::vector<std::string> problems;
  fs::path first = matrix_dir(ctx, 1) / "matrix-seed1.json";
  if (!fs::exists(first)) run_cli_matrix(ctx, matrix_dir(ctx, 1), 1);
  const fs::path again = ctx.work / "matrix-seed1-again";
  run_cli_matrix(ctx, again, 1);
  const std::string a = slurp(first), b = slurp(again / "matrix-seed1.json");
  const bool same_report = a == b;
  if (!same_report) problems.push_back("matrix reports differ");

  const fs::path ckpt_dir = ctx.work / "checkpoints";
  fs::create_directories(ckpt_dir);
  int exact = 0, total = 0;
  for (const auto& entry : fs::recursive_directory_iterator(again / "stages")) {
    if (entry.path().extension() != ".ckpt") continue;
    ++total;
    const SeqModel m = load_checkpoint(entry.path());
    const fs::path copy = ckpt_dir / "copy.ckpt";
    save_checkpoint(m, copy);
    const SeqModel back = load_checkpoint(copy);
    bool equal = back.names() == m.names() && slurp(copy) == slurp(entry.path());
    for (std::size_t i = 0; equal && i < m.tensors().size(); ++i) equal = back.tensors()[i].bit_equal(m.tensors()[i]);
    exact += equal;
  }
  if (total == 0 || exact != total) problems.push_back(fmt::format("{}/{} checkpoints round-trip exactly", exact, total));
  Outcome o;
  o.pass = problems.empty();
  o.detail = fmt::format("matrix --seed 1 twice: {} ({} bytes); {}/{} checkpoints re-saved bit-exactly",
                         same_report ? "byte-identical JSON" : "JSON differs", a.size(), exact, total);
  for (const auto& p : problems) o.detail += "; " + p;
  return o;
}

}  // namespace
}  // namespace cascadion

int main(int argc, char** argv) {
  using namespace cascadion;
  if (argc < 4) {
    std::cerr << "usage: acceptance <cascadion binary> <experiment config> <work dir> [criteria...]\n";
    return 2;
  }
  spdlog::set_level(spdlog::level::warn);
  const Context ctx{fs::absolute(argv[1]), fs::absolute(argv[2]), fs::absolute(argv[3])};
  fs::create_directories(ctx.work);
  std::set<int> wanted;
  for (int i = 4; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> criteria = {
      {"gradient correctness", gradients},  {"search exactness", search_exactness},
      {"reductions", reductions},           {"top-k weights", topk_weights},
      {"directional replication", replication}, {"metric fixtures", metric_fixtures},
      {"determinism and persistence", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << fmt::format("criterion {} {}: {}: {}", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
