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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cascadion/checkpoint.h"
#include "cascadion/common.h"
#include "cascadion/experiment.h"
#include "cascadion/losses.h"
#include "cascadion/metrics.h"
#include "cascadion/search.h"
#include "cascadion/synthdata.h"
#include "cascadion/trainer.h"

namespace py = pybind11;
using namespace cascadion;

namespace {

using Frames = py::array_t<double, py::array::c_style | py::array::forcecast>;

AcousticSequence to_acoustic(const Frames& frames) {
  if (frames.ndim() != 2) throw ShapeError("frames must be a 2-D array [T x d_feat]");
  const auto rows = static_cast<std::size_t>(frames.shape(0));
  const auto cols = static_cast<std::size_t>(frames.shape(1));
  return {Tensor::matrix(rows, cols, std::vector<double>(frames.data(), frames.data() + rows * cols))};
}

py::array_t<double> to_array(const Tensor& t) {
  py::array_t<double> out({t.rows(), t.cols()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

nlohmann::json parse_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cascaded speech translation on synthetic homophone data";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<FormatError>(m, "FormatError", error.ptr());

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<const std::vector<std::string>&>(), py::arg("content"))
      .def("__len__", &Vocabulary::size)
      .def("encode", &Vocabulary::encode)
      .def("decode", &Vocabulary::decode)
      .def("id", &Vocabulary::id)
      .def("token", &Vocabulary::token)
      .def_property_readonly("tokens", &Vocabulary::tokens);

  py::class_<Hypothesis>(m, "Hypothesis")
      .def_readonly("tokens", &Hypothesis::tokens)
      .def_readonly("sum_logprob", &Hypothesis::sum_logprob)
      .def_readonly("norm_logprob", &Hypothesis::norm_logprob)
      .def_readonly("truncated", &Hypothesis::truncated)
      .def("content", &Hypothesis::content);

  py::class_<SearchOptions>(m, "SearchOptions")
      .def(py::init([](int beam_size, int max_len) { return SearchOptions{beam_size, max_len}; }),
           py::arg("beam_size") = 12, py::arg("max_len") = 16)
      .def_readwrite("beam_size", &SearchOptions::beam_size)
      .def_readwrite("max_len", &SearchOptions::max_len);

  py::class_<SeqModel>(m, "SeqModel")
      .def_property_readonly("kind", [](const SeqModel& s) { return std::string(to_string(s.kind())); })
      .def_property_readonly("d", &SeqModel::d)
      .def_property_readonly("target_vocab", &SeqModel::target_vocab)
      .def_property_readonly("source_vocab", &SeqModel::source_vocab)
      .def_property_readonly("names", &SeqModel::names)
      .def("num_parameters", &SeqModel::num_parameters)
      .def("param", [](const SeqModel& s, const std::string& name) { return to_array(s.param(name)); })
      .def("bit_equal", &SeqModel::bit_equal)
      .def("save", [](const SeqModel& s, const std::filesystem::path& p) { save_checkpoint(s, p); });

  m.def("init_asr", [](const Vocabulary& vocab, int d, int d_feat, std::uint64_t seed) {
    return init_params({ModelKind::kAsr, std::nullopt, vocab, d, d_feat}, seed);
  }, py::arg("vocab"), py::arg("d"), py::arg("d_feat"), py::arg("seed"));
  m.def("init_mt", [](const Vocabulary& source, const Vocabulary& target, int d, std::uint64_t seed) {
    return init_params({ModelKind::kMt, source, target, d, std::nullopt}, seed);
  }, py::arg("source_vocab"), py::arg("target_vocab"), py::arg("d"), py::arg("seed"));
  m.def("load_checkpoint", [](const std::filesystem::path& p) { return load_checkpoint(p); });

  py::class_<TripletExample>(m, "Example")
      .def_readonly("id", &TripletExample::id)
      .def_property_readonly("domain", [](const TripletExample& e) { return std::string(to_string(e.domain)); })
      .def_property_readonly("frames", [](const TripletExample& e) { return to_array(e.x.frames); })
      .def_readonly("transcript", &TripletExample::transcript)
      .def_readonly("translation", &TripletExample::translation);

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def("__getitem__", [](const Dataset& d, std::size_t i) {
        if (i >= d.size()) throw py::index_error();
        return d.examples[i];
      })
      .def_readonly("examples", &Dataset::examples)
      .def_readonly("transcript_vocab", &Dataset::transcript_vocab)
      .def_readonly("translation_vocab", &Dataset::translation_vocab)
      .def("in_domain", [](const Dataset& d) { return d.filter(Domain::kIn); })
      .def("fingerprint", &Dataset::fingerprint)
      .def("write_jsonl", [](const Dataset& d, const std::filesystem::path& p) { write_jsonl(d, p); });

  py::class_<DatasetSplits>(m, "DatasetSplits")
      .def_readonly("train", &DatasetSplits::train)
      .def_readonly("valid", &DatasetSplits::valid)
      .def_readonly("test", &DatasetSplits::test);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_static("from_json", [](const std::string& text) { return ExperimentConfig::from_json(parse_json(text)); })
      .def_static("load", [](const std::filesystem::path& p) { return load_experiment_config(p); })
      .def("to_json", [](const ExperimentConfig& c) { return c.to_json().dump(); });

  m.def("generate_dataset", [](const ExperimentConfig& c, std::uint64_t seed) {
    return generate_dataset(c.task, c.n_train, c.n_valid, c.n_test, seed);
  }, py::arg("config"), py::arg("seed"));
  m.def("read_jsonl", [](const std::filesystem::path& p, const Vocabulary& f, const Vocabulary& e) {
    return read_jsonl(p, f, e);
  });

  py::class_<TrainResult>(m, "TrainResult")
      .def_property_readonly("asr", [](const TrainResult& r) { return r.models.asr; })
      .def_property_readonly("mt", [](const TrainResult& r) { return r.models.mt; })
      .def_readonly("best_epoch", &TrainResult::best_epoch)
      .def_readonly("diverged", &TrainResult::diverged)
      .def_readonly("skipped_examples", &TrainResult::skipped_examples)
      .def_property_readonly("metrics_jsonl", [](const TrainResult& r) { return metrics_jsonl(r.log); });

  m.def(
      "train",
      [](const ExperimentConfig& c, const std::string& mode, const Dataset& train_data, const Dataset& valid_data,
         std::optional<SeqModel> asr, std::optional<SeqModel> mt, std::uint64_t seed, bool in_domain) {
        TrainConfig tc = c.train_config(train_mode_from_string(mode), seed);
        if (in_domain) tc.domain_filter = DomainFilter::kInDomain;
        py::gil_scoped_release release;
        return train(tc, train_data, valid_data, {std::move(asr), std::move(mt)});
      },
      py::arg("config"), py::arg("mode"), py::arg("train"), py::arg("valid"), py::arg("asr") = py::none(),
      py::arg("mt") = py::none(), py::arg("seed") = 1, py::arg("in_domain") = false);

  m.def("beam_search_tokens", [](const SeqModel& model, const std::vector<int>& source, const SearchOptions& o) {
    return beam_search(model, TokenSequence(source), o).hyps;
  }, py::arg("model"), py::arg("source"), py::arg("options") = SearchOptions{});
  m.def("beam_search_frames", [](const SeqModel& model, const Frames& frames, const SearchOptions& o) {
    return beam_search(model, to_acoustic(frames), o).hyps;
  }, py::arg("model"), py::arg("frames"), py::arg("options") = SearchOptions{});

  m.def("cascade_translate", [](const SeqModel& asr, const SeqModel& mt, const Frames& frames,
                                const SearchOptions& a, const SearchOptions& b) {
    const CascadeResult r = cascade_translate(asr, mt, to_acoustic(frames), a, b);
    return py::make_tuple(r.transcript, r.translation);
  }, py::arg("asr"), py::arg("mt"), py::arg("frames"), py::arg("asr_options") = SearchOptions{},
     py::arg("mt_options") = SearchOptions{});
  m.def("topk_search", [](const SeqModel& asr, const SeqModel& mt, const Frames& frames, int k,
                          const SearchOptions& a, const SearchOptions& b) {
    const TopKSearchResult r = topk_search(asr, mt, to_acoustic(frames), k, a, b);
    py::dict out;
    out["translation"] = r.translation;
    out["chosen"] = r.chosen;
    out["transcripts"] = r.transcripts;
    out["translations"] = r.translations;
    out["weights"] = r.weights.probs;
    out["log_scores"] = r.log_scores;
    return out;
  }, py::arg("asr"), py::arg("mt"), py::arg("frames"), py::arg("k") = 4,
     py::arg("asr_options") = SearchOptions{}, py::arg("mt_options") = SearchOptions{});
  m.def("tight_translate", [](const SeqModel& asr, const SeqModel& mt, const Frames& frames, double gamma,
                              const SearchOptions& a, const SearchOptions& b) {
    const TightResult r = tight_translate(asr, mt, to_acoustic(frames), gamma, a, b);
    return py::make_tuple(r.transcript, r.translation, to_array(r.soft_source.probs));
  }, py::arg("asr"), py::arg("mt"), py::arg("frames"), py::arg("gamma") = 1.0,
     py::arg("asr_options") = SearchOptions{}, py::arg("mt_options") = SearchOptions{});

  m.def("topk_weights", [](const std::vector<double>& norm_logprobs, int k) {
    KBestList list;
    for (double s : norm_logprobs) {
      Hypothesis h;
      h.norm_logprob = s;
      list.hyps.push_back(h);
    }
    return renormalize_topk(list, k).probs;
  }, py::arg("norm_logprobs"), py::arg("k"));
  m.def("sharpen", [](const std::vector<double>& p, double gamma) { return sharpen(p, gamma); });

  m.def("label_smoothed_ce", [](const SeqModel& mt, const std::vector<int>& source, const std::vector<int>& target,
                                double alpha) {
    return label_smoothed_ce(mt, TokenSequence(source), target, alpha).loss;
  }, py::arg("mt"), py::arg("source"), py::arg("target"), py::arg("alpha") = 0.1);
  m.def("topk_train_loss", [](const SeqModel& asr, const SeqModel& mt, const Frames& frames,
                              const std::vector<int>& translation, int n, int k, int max_len) {
    return topk_train_loss(asr, mt, to_acoustic(frames), translation, n, k, max_len).loss;
  }, py::arg("asr"), py::arg("mt"), py::arg("frames"), py::arg("translation"), py::arg("n") = 12,
     py::arg("k") = 4, py::arg("max_len") = 16);
  m.def("tight_train_loss", [](const SeqModel& asr, const SeqModel& mt, const Frames& frames,
                               const std::vector<int>& transcript, const std::vector<int>& translation,
                               double gamma, double alpha) {
    return tight_train_loss(asr, mt, to_acoustic(frames), transcript, translation, gamma, alpha).loss;
  }, py::arg("asr"), py::arg("mt"), py::arg("frames"), py::arg("transcript"), py::arg("translation"),
     py::arg("gamma") = 1.0, py::arg("alpha") = 0.1);

  m.def("sentence_bleu", [](const Tokens& h, const Tokens& r) { return sentence_bleu(h, r); });
  m.def("corpus_bleu", &corpus_bleu);
  m.def("wer", [](const Tokens& h, const Tokens& r) { return wer(h, r); });
  m.def("corpus_wer", &corpus_wer);
  m.def("oracle_select", [](const std::vector<Tokens>& c, const Tokens& r) { return oracle_select(c, r); });

  m.def("run_matrix", [](const ExperimentConfig& c, std::uint64_t seed, const std::filesystem::path& out) {
    MatrixResult r;
    {
      py::gil_scoped_release release;
      r = run_matrix(c, seed, out);
    }
    return py::make_tuple(r.to_json().dump(), r.table());
  }, py::arg("config"), py::arg("seed"), py::arg("out_dir"));
}
