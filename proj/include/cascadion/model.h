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

#ifndef CASCADION_MODEL_H_
#define CASCADION_MODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cascadion/autodiff.h"
#include "cascadion/tensor.h"
#include "cascadion/vocabulary.h"

namespace cascadion {

enum class ModelKind { kAsr, kMt };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

/// T frames of d_feat features standing in for speech.
struct AcousticSequence {
  Tensor frames;  // [T x d_feat]

  std::size_t num_frames() const { return frames.empty() ? 0 : frames.rows(); }
  void validate() const;
};

/// One distribution over the transcript vocabulary per source position.
struct SoftSource {
  Tensor probs;  // [J x |V_F|]

  std::size_t length() const { return probs.empty() ? 0 : probs.rows(); }
  void validate(int vocab_size) const;
  /// One-hot rows for the given token ids.
  static SoftSource one_hot(std::span<const int> tokens, int vocab_size);
};

using TokenSequence = std::vector<int>;
using Source = std::variant<TokenSequence, AcousticSequence, SoftSource>;

struct ModelConfig {
  ModelKind kind = ModelKind::kMt;
  std::optional<Vocabulary> source_vocab;  // MT only
  Vocabulary target_vocab;
  int d = 32;
  std::optional<int> d_feat;  // ASR only
};

/// Parameters of one encoder-decoder plus its metadata.
///
/// Encoder: input projection (ASR) or source embedding (MT), then a single
/// gated recurrent layer. Decoder: gated recurrent state over target
/// embeddings, single-head additive attention over encoder states, a tanh
/// hidden layer and the output projection.
class SeqModel {
 public:
  ModelKind kind() const { return kind_; }
  int d() const { return d_; }
  int d_feat() const { return d_feat_; }
  const std::optional<Vocabulary>& source_vocab() const { return source_vocab_; }
  const Vocabulary& target_vocab() const { return target_vocab_; }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::vector<Tensor>& mutable_tensors() { return tensors_; }
  const Tensor& param(std::string_view name) const;
  std::size_t num_parameters() const;

  /// Checks every shape against the metadata and that all values are finite.
  void validate() const;

  /// Bit-exact equality of metadata and every tensor.
  bool bit_equal(const SeqModel& other) const;

 private:
  friend SeqModel init_params(const ModelConfig& config, std::uint64_t seed);
  friend SeqModel assemble_model(ModelKind, std::optional<Vocabulary>, Vocabulary, int, int,
                                 std::vector<std::string>, std::vector<Tensor>);

  ModelKind kind_ = ModelKind::kMt;
  int d_ = 0;
  int d_feat_ = 0;
  std::optional<Vocabulary> source_vocab_;
  Vocabulary target_vocab_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

/// Parameter names and shapes in storage order.
std::vector<std::pair<std::string, Shape>> parameter_layout(ModelKind kind, int d, int d_feat,
                                                            int source_vocab, int target_vocab);

/// Glorot-uniform matrices, zero biases. Pure function of its arguments.
SeqModel init_params(const ModelConfig& config, std::uint64_t seed);

/// Builds a model from loaded parts and validates it.
SeqModel assemble_model(ModelKind kind, std::optional<Vocabulary> source_vocab,
                        Vocabulary target_vocab, int d, int d_feat, std::vector<std::string> names,
                        std::vector<Tensor> tensors);

/// A model's parameters as Vars. With a tape they are leaves (ids in
/// parameter order, offset by whatever was registered before); without one
/// they are constants.
class BoundModel {
 public:
  BoundModel(const SeqModel& model, GradTape* tape);
  /// Uses caller-supplied variables, one per parameter in layout order.
  BoundModel(const SeqModel& model, std::span<const Var> vars);

  const SeqModel& model() const { return *model_; }
  std::span<const Var> vars() const { return vars_; }
  /// Leaf id of the first parameter on the tape.
  std::size_t first_leaf() const { return first_leaf_; }

  Var in_w, in_b, src_embed;
  Var enc_wz, enc_uz, enc_bz, enc_wc, enc_uc, enc_bc;
  Var tgt_embed;
  Var dec_wz, dec_uz, dec_bz, dec_wc, dec_uc, dec_bc;
  Var att_wk, att_wq, att_v;
  Var out_w1, out_b1, out_w, out_b;

 private:
  void bind(std::vector<Var> vars);

  const SeqModel* model_;
  std::vector<Var> vars_;
  std::size_t first_leaf_ = 0;
};

struct EncoderStates {
  Var states;  // [L x d]
  Var keys;    // states · att_wk
  Var final_state;
  std::size_t length = 0;
};

struct DecoderState {
  Var hidden;
};

struct StepOutput {
  DecoderState state;
  Var logits;
  Var log_probs;
};

EncoderStates encode_frames(const BoundModel& model, const AcousticSequence& x);
EncoderStates encode_tokens(const BoundModel& model, std::span<const int> tokens);
/// Expected embedding per position: probs · source_embedding.
EncoderStates encode_soft(const BoundModel& model, const Var& probs);
EncoderStates encode(const BoundModel& model, const Source& source);

DecoderState initial_decoder_state(const EncoderStates& enc);
/// Consumes `prev_token` and predicts the next one.
StepOutput decoder_step(const BoundModel& model, const EncoderStates& enc,
                        const DecoderState& state, int prev_token);

/// Teacher forcing over BOS t_1 .. t_I: returns I + 1 steps, the last one
/// predicting EOS. `target` holds content tokens only.
std::vector<StepOutput> teacher_force(const BoundModel& model, const EncoderStates& enc,
                                      std::span<const int> target);

/// Next-token log-distribution after `prefix`, which must start with BOS and
/// contain no PAD.
Tensor decode_step(const BoundModel& model, const EncoderStates& enc, std::span<const int> prefix);

}  // namespace cascadion

#endif  // CASCADION_MODEL_H_
