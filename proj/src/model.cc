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

#include "cascadion/model.h"

#include <cmath>
#include <random>

#include "cascadion/common.h"

namespace cascadion {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::kAsr ? "asr" : "mt"; }

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "asr") return ModelKind::kAsr;
  if (name == "mt") return ModelKind::kMt;
  throw FormatError("unknown model kind '" + std::string(name) + "'");
}

void AcousticSequence::validate() const {
  if (frames.empty() || frames.rank() != 2) throw Error("acoustic sequence: need T >= 1 frames");
  if (!frames.all_finite()) throw Error("acoustic sequence: non-finite frame value");
}

void SoftSource::validate(int vocab_size) const {
  if (probs.empty() || probs.rank() != 2) throw Error("soft source: empty");
  if (static_cast<int>(probs.cols()) != vocab_size) {
    throw ShapeError("soft source: width " + std::to_string(probs.cols()) +
                     " does not match vocabulary size " + std::to_string(vocab_size));
  }
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double total = 0.0;
    for (double p : probs.row(r)) {
      if (!(p >= 0.0)) throw Error("soft source: negative or NaN probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error("soft source: position " + std::to_string(r) + " sums to " +
                  std::to_string(total));
    }
  }
}

SoftSource SoftSource::one_hot(std::span<const int> tokens, int vocab_size) {
  Tensor probs({tokens.size(), static_cast<std::size_t>(vocab_size)});
  for (std::size_t j = 0; j < tokens.size(); ++j) probs.at(j, tokens[j]) = 1.0;
  return SoftSource{std::move(probs)};
}

std::vector<std::pair<std::string, Shape>> parameter_layout(ModelKind kind, int d, int d_feat,
                                                            int source_vocab, int target_vocab) {
  const std::size_t D = d;
  std::vector<std::pair<std::string, Shape>> layout;
  if (kind == ModelKind::kAsr) {
    layout.push_back({"src.in_proj.w", {static_cast<std::size_t>(d_feat), D}});
    layout.push_back({"src.in_proj.b", {D}});
  } else {
    layout.push_back({"src.embed", {static_cast<std::size_t>(source_vocab), D}});
  }
  for (const char* block : {"enc", "dec"}) {
    if (std::string(block) == "dec") {
      layout.push_back({"tgt.embed", {static_cast<std::size_t>(target_vocab), D}});
    }
    const std::string b = block;
    layout.push_back({b + ".wz", {D, D}});
    layout.push_back({b + ".uz", {D, D}});
    layout.push_back({b + ".bz", {D}});
    layout.push_back({b + ".wc", {D, D}});
    layout.push_back({b + ".uc", {D, D}});
    layout.push_back({b + ".bc", {D}});
  }
  layout.push_back({"att.wk", {D, D}});
  layout.push_back({"att.wq", {D, D}});
  layout.push_back({"att.v", {D}});
  layout.push_back({"out.w1", {2 * D, D}});
  layout.push_back({"out.b1", {D}});
  layout.push_back({"out.w", {D, static_cast<std::size_t>(target_vocab)}});
  layout.push_back({"out.b", {static_cast<std::size_t>(target_vocab)}});
  return layout;
}

namespace {

bool is_bias(const std::string& name) {
  const auto dot = name.rfind('.');
  return name.compare(dot + 1, 1, "b") == 0;
}

int source_vocab_size(ModelKind kind, const std::optional<Vocabulary>& vocab) {
  return kind == ModelKind::kMt && vocab ? vocab->size() : 0;
}

}  // namespace

SeqModel init_params(const ModelConfig& config, std::uint64_t seed) {
  if (config.d < 4) throw Error("init_params: model width d must be >= 4");
  if (config.target_vocab.size() < 5) throw Error("init_params: target vocabulary too small");
  SeqModel model;
  model.kind_ = config.kind;
  model.d_ = config.d;
  model.target_vocab_ = config.target_vocab;
  if (config.kind == ModelKind::kAsr) {
    if (!config.d_feat || *config.d_feat < 1) {
      throw Error("init_params: ASR model requires the feature dimension d_feat");
    }
    model.d_feat_ = *config.d_feat;
  } else {
    if (!config.source_vocab || config.source_vocab->size() < 5) {
      throw Error("init_params: MT model requires a source vocabulary");
    }
    model.source_vocab_ = config.source_vocab;
  }

  std::mt19937_64 rng(seed);
  for (auto& [name, shape] : parameter_layout(model.kind_, model.d_, model.d_feat_,
                                              source_vocab_size(model.kind_, model.source_vocab_),
                                              model.target_vocab_.size())) {
    Tensor t(shape);
    if (!is_bias(name)) {
      const double fan_in = static_cast<double>(shape[0]);
      const double fan_out = shape.size() == 2 ? static_cast<double>(shape[1]) : 1.0;
      const double s = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-s, s);
      for (double& v : t.values()) v = dist(rng);
    }
    model.names_.push_back(name);
    model.tensors_.push_back(std::move(t));
  }
  return model;
}

SeqModel assemble_model(ModelKind kind, std::optional<Vocabulary> source_vocab,
                        Vocabulary target_vocab, int d, int d_feat, std::vector<std::string> names,
                        std::vector<Tensor> tensors) {
  SeqModel model;
  model.kind_ = kind;
  model.d_ = d;
  model.d_feat_ = kind == ModelKind::kAsr ? d_feat : 0;
  model.source_vocab_ = kind == ModelKind::kMt ? std::move(source_vocab) : std::nullopt;
  model.target_vocab_ = std::move(target_vocab);
  model.names_ = std::move(names);
  model.tensors_ = std::move(tensors);
  model.validate();
  return model;
}

const Tensor& SeqModel::param(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return tensors_[i];
  }
  throw Error("model: no parameter named '" + std::string(name) + "'");
}

std::size_t SeqModel::num_parameters() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

void SeqModel::validate() const {
  if (kind_ == ModelKind::kMt && !source_vocab_) {
    throw FormatError("model: MT model without source vocabulary");
  }
  if (kind_ == ModelKind::kAsr && d_feat_ < 1) throw FormatError("model: ASR model without d_feat");
  const auto layout = parameter_layout(kind_, d_, d_feat_, source_vocab_size(kind_, source_vocab_),
                                       target_vocab_.size());
  if (layout.size() != names_.size() || names_.size() != tensors_.size()) {
    throw FormatError("model: expected " + std::to_string(layout.size()) + " tensors, found " +
                      std::to_string(tensors_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != names_[i]) {
      throw FormatError("model: expected tensor '" + layout[i].first + "', found '" + names_[i] +
                        "'");
    }
    if (layout[i].second != tensors_[i].shape()) {
      throw FormatError("model: tensor '" + names_[i] + "' has shape " +
                        shape_string(tensors_[i].shape()) + ", vocabulary/width imply " +
                        shape_string(layout[i].second));
    }
    if (!tensors_[i].all_finite()) {
      throw FormatError("model: tensor '" + names_[i] + "' has non-finite values");
    }
  }
}

bool SeqModel::bit_equal(const SeqModel& other) const {
  if (kind_ != other.kind_ || d_ != other.d_ || d_feat_ != other.d_feat_ ||
      source_vocab_ != other.source_vocab_ || !(target_vocab_ == other.target_vocab_) ||
      names_ != other.names_ || tensors_.size() != other.tensors_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (!tensors_[i].bit_equal(other.tensors_[i])) return false;
  }
  return true;
}

BoundModel::BoundModel(const SeqModel& model, GradTape* tape) : model_(&model) {
  first_leaf_ = tape ? tape->num_leaves() : 0;
  std::vector<Var> vars;
  vars.reserve(model.tensors().size());
  for (const auto& t : model.tensors()) vars.push_back(tape ? tape->parameter(t) : constant(t));
  bind(std::move(vars));
}

BoundModel::BoundModel(const SeqModel& model, std::span<const Var> vars) : model_(&model) {
  if (vars.size() != model.tensors().size()) {
    throw ShapeError("BoundModel: expected " + std::to_string(model.tensors().size()) +
                     " parameters, got " + std::to_string(vars.size()));
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].shape() != model.tensors()[i].shape()) {
      throw ShapeError("BoundModel: parameter " + model.names()[i] + " has shape " +
                       shape_string(vars[i].shape()) + ", expected " +
                       shape_string(model.tensors()[i].shape()));
    }
  }
  bind(std::vector<Var>(vars.begin(), vars.end()));
}

void BoundModel::bind(std::vector<Var> vars) {
  vars_ = std::move(vars);
  const auto& names = model_->names();
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const Var& v = vars_[i];
    const std::string& n = names[i];
    if (n == "src.in_proj.w") in_w = v;
    else if (n == "src.in_proj.b") in_b = v;
    else if (n == "src.embed") src_embed = v;
    else if (n == "enc.wz") enc_wz = v;
    else if (n == "enc.uz") enc_uz = v;
    else if (n == "enc.bz") enc_bz = v;
    else if (n == "enc.wc") enc_wc = v;
    else if (n == "enc.uc") enc_uc = v;
    else if (n == "enc.bc") enc_bc = v;
    else if (n == "tgt.embed") tgt_embed = v;
    else if (n == "dec.wz") dec_wz = v;
    else if (n == "dec.uz") dec_uz = v;
    else if (n == "dec.bz") dec_bz = v;
    else if (n == "dec.wc") dec_wc = v;
    else if (n == "dec.uc") dec_uc = v;
    else if (n == "dec.bc") dec_bc = v;
    else if (n == "att.wk") att_wk = v;
    else if (n == "att.wq") att_wq = v;
    else if (n == "att.v") att_v = v;
    else if (n == "out.w1") out_w1 = v;
    else if (n == "out.b1") out_b1 = v;
    else if (n == "out.w") out_w = v;
    else if (n == "out.b") out_b = v;
  }
}

namespace {

// Gated unit: z = sigmoid(xz + h·uz), c = tanh(xc + h·uc), h' = c + z ⊙ (h - c).
Var gated_update(const Var& xz, const Var& xc, const Var& h, const Var& uz, const Var& uc) {
  Var z = sigmoid(add(xz, matmul(h, uz)));
  Var c = tanh(add(xc, matmul(h, uc)));
  return add(c, mul(z, sub(h, c)));
}

EncoderStates run_encoder(const BoundModel& m, const Var& inputs) {
  const std::size_t length = inputs.value().rows();
  Var xz = affine(inputs, m.enc_wz, m.enc_bz);
  Var xc = affine(inputs, m.enc_wc, m.enc_bc);
  Var h = constant(Tensor({static_cast<std::size_t>(m.model().d())}));
  std::vector<Var> states;
  states.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    h = gated_update(row(xz, t), row(xc, t), h, m.enc_uz, m.enc_uc);
    states.push_back(h);
  }
  EncoderStates enc;
  enc.states = stack(states);
  enc.keys = matmul(enc.states, m.att_wk);
  enc.final_state = h;
  enc.length = length;
  return enc;
}

}  // namespace

EncoderStates encode_frames(const BoundModel& model, const AcousticSequence& x) {
  if (model.model().kind() != ModelKind::kAsr) {
    throw Error("encode: acoustic input requires an ASR model");
  }
  if (x.num_frames() == 0) throw Error("encode: empty source");
  x.validate();
  if (static_cast<int>(x.frames.cols()) != model.model().d_feat()) {
    throw ShapeError("encode: frames have " + std::to_string(x.frames.cols()) +
                     " features, model expects " + std::to_string(model.model().d_feat()));
  }
  Var projected = tanh(affine(constant(x.frames), model.in_w, model.in_b));
  return run_encoder(model, projected);
}

EncoderStates encode_tokens(const BoundModel& model, std::span<const int> tokens) {
  if (model.model().kind() != ModelKind::kMt) throw Error("encode: token input requires an MT model");
  if (tokens.empty()) throw Error("encode: empty source");
  std::vector<Var> rows;
  rows.reserve(tokens.size());
  for (int t : tokens) rows.push_back(embedding_lookup(model.src_embed, static_cast<std::size_t>(t)));
  return run_encoder(model, stack(rows));
}

EncoderStates encode_soft(const BoundModel& model, const Var& probs) {
  if (model.model().kind() != ModelKind::kMt) throw Error("encode: soft input requires an MT model");
  if (probs.value().empty()) throw Error("encode: empty source");
  if (probs.value().rank() != 2) {
    throw ShapeError("encode: soft source must be [J x |V|], got " + shape_string(probs.shape()));
  }
  return run_encoder(model, matmul(probs, model.src_embed));
}

EncoderStates encode(const BoundModel& model, const Source& source) {
  return std::visit(
      [&](const auto& s) -> EncoderStates {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TokenSequence>) {
          return encode_tokens(model, s);
        } else if constexpr (std::is_same_v<T, AcousticSequence>) {
          return encode_frames(model, s);
        } else {
          if (model.model().kind() == ModelKind::kMt) {
            s.validate(model.model().source_vocab()->size());
          }
          return encode_soft(model, constant(s.probs));
        }
      },
      source);
}

DecoderState initial_decoder_state(const EncoderStates& enc) { return DecoderState{enc.final_state}; }

StepOutput decoder_step(const BoundModel& m, const EncoderStates& enc, const DecoderState& state,
                        int prev_token) {
  Var e = embedding_lookup(m.tgt_embed, static_cast<std::size_t>(prev_token));
  Var s = gated_update(affine(e, m.dec_wz, m.dec_bz), affine(e, m.dec_wc, m.dec_bc), state.hidden,
                       m.dec_uz, m.dec_uc);
  Var query = matmul(s, m.att_wq);
  Var scores = matmul(tanh(bias_add(enc.keys, query)), m.att_v);
  Var context = matmul(softmax(scores), enc.states);
  const Var parts[2] = {s, context};
  Var hidden = tanh(affine(concat(parts), m.out_w1, m.out_b1));
  StepOutput out;
  out.state = DecoderState{s};
  out.logits = affine(hidden, m.out_w, m.out_b);
  out.log_probs = log_softmax(out.logits);
  return out;
}

std::vector<StepOutput> teacher_force(const BoundModel& model, const EncoderStates& enc,
                                      std::span<const int> target) {
  std::vector<StepOutput> steps;
  steps.reserve(target.size() + 1);
  DecoderState state = initial_decoder_state(enc);
  int prev = Vocabulary::kBos;
  for (std::size_t i = 0; i <= target.size(); ++i) {
    steps.push_back(decoder_step(model, enc, state, prev));
    state = steps.back().state;
    if (i < target.size()) prev = target[i];
  }
  return steps;
}

Tensor decode_step(const BoundModel& model, const EncoderStates& enc, std::span<const int> prefix) {
  if (prefix.empty() || prefix.front() != Vocabulary::kBos) {
    throw Error("decode_step: prefix must start with BOS");
  }
  for (int t : prefix) {
    if (t == Vocabulary::kPad) throw Error("decode_step: prefix contains PAD");
  }
  DecoderState state = initial_decoder_state(enc);
  StepOutput out;
  for (int t : prefix) {
    out = decoder_step(model, enc, state, t);
    state = out.state;
  }
  return out.log_probs.value();
}

}  // namespace cascadion
