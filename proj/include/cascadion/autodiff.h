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

#ifndef CASCADION_AUTODIFF_H_
#define CASCADION_AUTODIFF_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "cascadion/tensor.h"

namespace cascadion {

class GradTape;

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation during backward
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  GradTape* tape = nullptr;
  std::size_t position = 0;
  bool requires_grad = false;

  Tensor& grad_buffer();
};

}  // namespace detail

/// Handle to a value in a (possibly recorded) computation.
///
/// A Var that depends on a tape parameter is recorded on that tape; anything
/// else is a constant and carries no backward closure. Inference therefore
/// runs through the same code as training, just without a tape.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  GradTape* tape() const { return node_->tape; }
  bool valid() const { return static_cast<bool>(node_); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Gradients indexed by leaf id (the order of GradTape::parameter calls).
using Gradients = std::vector<Tensor>;

/// Append-only record of primitive operations; rebuilt per example.
/// Confined to one thread.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  /// Registers a leaf. Its id is the number of leaves registered before it.
  Var parameter(const Tensor& value);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_leaves() const { return leaves_.size(); }

  /// Reverse sweep from a scalar loss. Leaves the loss does not reach receive
  /// zero gradients. Throws if `loss` was not recorded on this tape.
  Gradients backward(const Var& loss);

 private:
  friend Var record(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> fn);

  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::vector<std::shared_ptr<detail::Node>> leaves_;
};

/// Creates a node from a forward value. The backward closure is kept only if
/// some input requires a gradient.
Var record(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> fn);

/// Unrecorded value.
Var constant(Tensor value);

inline Gradients backward(GradTape& tape, const Var& loss) { return tape.backward(loss); }

// Primitive operations. Every op validates shapes and throws ShapeError naming
// the op and the offending shapes. There is no broadcasting except the bias
// add in `affine` and `bias_add`.

/// x·W + b. x is [in] or [rows x in], W is [in x out], b is [out].
Var affine(const Var& x, const Var& w, const Var& b);
/// Adds the vector b to every row of m.
Var bias_add(const Var& m, const Var& b);
/// Row `id` of the [vocab x d] table.
Var embedding_lookup(const Var& table, std::size_t id);
/// Normalizes over the last axis.
Var softmax(const Var& x);
Var log_softmax(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// [r x k]·[k x c], [k]·[k x c] -> [c], or [r x k]·[k] -> [r].
Var matmul(const Var& a, const Var& b);
/// Sum of all elements; scalar result.
Var sum(const Var& x);
/// Stable log(sum(exp(.))) over the last axis: [n] -> scalar, [r x n] -> [r].
Var log_sum_exp(const Var& x);
/// Picks elements of a rank-1 tensor.
Var gather(const Var& x, std::span<const std::size_t> indices);
Var gather(const Var& x, std::size_t index);
/// Row r of a matrix as a rank-1 tensor.
Var row(const Var& m, std::size_t r);
/// Concatenates rank-1 tensors.
Var concat(std::span<const Var> parts);
/// Stacks equal-length rank-1 tensors into a matrix, one per row.
Var stack(std::span<const Var> rows);
Var scale(const Var& x, double factor);

}  // namespace cascadion

#endif  // CASCADION_AUTODIFF_H_
