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

#include "cascadion/autodiff.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cascadion/common.h"

namespace cascadion {

using detail::Node;

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor::zeros_like(value);
  return grad;
}

Var GradTape::parameter(const Tensor& value) {
  auto node = std::make_shared<Node>();
  node->value = value;
  node->tape = this;
  node->position = nodes_.size();
  node->requires_grad = true;
  nodes_.push_back(node);
  leaves_.push_back(node);
  return Var(std::move(node));
}

Gradients GradTape::backward(const Var& loss) {
  if (!loss.valid() || loss.tape() != this || !loss.requires_grad()) {
    throw Error("backward: loss was not recorded on this tape");
  }
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_string(loss.shape()));
  }
  for (auto& node : nodes_) node->grad = Tensor();
  Node& root = *loss.node();
  root.grad_buffer()[0] = 1.0;
  for (std::size_t i = root.position + 1; i-- > 0;) {
    Node& node = *nodes_[i];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node);
  }
  Gradients grads;
  grads.reserve(leaves_.size());
  for (auto& leaf : leaves_) {
    grads.push_back(leaf->grad.empty() ? Tensor::zeros_like(leaf->value) : leaf->grad);
  }
  return grads;
}

Var record(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  GradTape* tape = nullptr;
  for (const auto& in : inputs) {
    if (!in.requires_grad()) continue;
    if (tape && in.tape() != tape) throw Error("autodiff: inputs recorded on different tapes");
    tape = in.tape();
  }
  if (tape) {
    node->requires_grad = true;
    node->tape = tape;
    node->position = tape->nodes_.size();
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(fn);
    tape->nodes_.push_back(node);
  }
  return Var(std::move(node));
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a) {
  throw ShapeError(std::string(op) + ": unsupported shape " + shape_string(a));
}

// Accumulates into an input's gradient only when that input is differentiable.
inline Tensor* grad_of(Node& node, std::size_t input) {
  Node& in = *node.inputs[input];
  return in.requires_grad ? &in.grad_buffer() : nullptr;
}

template <typename F>
Var unary_elementwise(const Var& x, F&& f, std::function<void(Node&)> bwd) {
  Tensor out = Tensor::zeros_like(x.value());
  const auto in = x.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return record(std::move(out), {x}, std::move(bwd));
}

double row_log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

Var affine(const Var& x, const Var& w, const Var& b) {
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& B = b.value();
  if (W.rank() != 2 || B.rank() != 1 || X.cols() != W.shape()[0] || B.size() != W.shape()[1]) {
    throw ShapeError("affine: incompatible shapes " + shape_string(X.shape()) + ", " +
                     shape_string(W.shape()) + ", " + shape_string(B.shape()));
  }
  const std::size_t rows = X.rows(), in = W.shape()[0], out_dim = W.shape()[1];
  Tensor out = X.rank() == 1 ? Tensor({out_dim}) : Tensor({rows, out_dim});
  for (std::size_t r = 0; r < rows; ++r) {
    auto o = out.row(r);
    std::copy(B.values().begin(), B.values().end(), o.begin());
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = X.at(r, i);
      const auto wrow = W.row(i);
      for (std::size_t c = 0; c < out_dim; ++c) o[c] += xi * wrow[c];
    }
  }
  return record(std::move(out), {x, w, b}, [rows, in, out_dim](Node& n) {
    const Tensor& X = n.inputs[0]->value;
    const Tensor& W = n.inputs[1]->value;
    const Tensor& g = n.grad;
    if (Tensor* dx = grad_of(n, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < in; ++i) {
          double acc = 0.0;
          for (std::size_t c = 0; c < out_dim; ++c) acc += g.at(r, c) * W.at(i, c);
          dx->at(r, i) += acc;
        }
      }
    }
    if (Tensor* dw = grad_of(n, 1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < in; ++i) {
          const double xi = X.at(r, i);
          auto drow = dw->row(i);
          for (std::size_t c = 0; c < out_dim; ++c) drow[c] += xi * g.at(r, c);
        }
      }
    }
    if (Tensor* db = grad_of(n, 2)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < out_dim; ++c) (*db)[c] += g.at(r, c);
      }
    }
  });
}

Var bias_add(const Var& m, const Var& b) {
  const Tensor& M = m.value();
  const Tensor& B = b.value();
  if (B.rank() != 1 || M.cols() != B.size()) shape_fail("bias_add", M.shape(), B.shape());
  Tensor out = M;
  for (std::size_t r = 0; r < M.rows(); ++r) {
    auto o = out.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] += B[c];
  }
  return record(std::move(out), {m, b}, [](Node& n) {
    const Tensor& g = n.grad;
    if (Tensor* dm = grad_of(n, 0)) *dm += g;
    if (Tensor* db = grad_of(n, 1)) {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) (*db)[c] += g.at(r, c);
      }
    }
  });
}

Var row(const Var& m, std::size_t r) {
  const Tensor& M = m.value();
  if (M.rank() != 2 || r >= M.rows()) {
    throw ShapeError("gather: row " + std::to_string(r) + " out of range for " +
                     shape_string(M.shape()));
  }
  const auto src = M.row(r);
  Tensor out({M.cols()}, std::vector<double>(src.begin(), src.end()));
  return record(std::move(out), {m}, [r](Node& n) {
    Tensor* dm = grad_of(n, 0);
    if (!dm) return;
    auto d = dm->row(r);
    for (std::size_t c = 0; c < d.size(); ++c) d[c] += n.grad[c];
  });
}

Var embedding_lookup(const Var& table, std::size_t id) {
  const Tensor& E = table.value();
  if (E.rank() != 2 || id >= E.rows()) {
    throw ShapeError("embedding_lookup: id " + std::to_string(id) + " out of range for " +
                     shape_string(E.shape()));
  }
  return row(table, id);
}

Var softmax(const Var& x) {
  const Tensor& X = x.value();
  Tensor out = X;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto o = out.row(r);
    const double m = *std::max_element(o.begin(), o.end());
    double s = 0.0;
    for (double& v : o) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : o) v /= s;
  }
  return record(std::move(out), {x}, [](Node& n) {
    Tensor* dx = grad_of(n, 0);
    if (!dx) return;
    const Tensor& y = n.value;
    const Tensor& g = n.grad;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
      auto d = dx->row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) d[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var log_softmax(const Var& x) {
  const Tensor& X = x.value();
  Tensor out = X;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto o = out.row(r);
    const double lse = row_log_sum_exp(X.row(r));
    for (double& v : o) v -= lse;
  }
  return record(std::move(out), {x}, [](Node& n) {
    Tensor* dx = grad_of(n, 0);
    if (!dx) return;
    const Tensor& y = n.value;
    const Tensor& g = n.grad;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      double total = 0.0;
      for (double v : gr) total += v;
      auto d = dx->row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) d[c] += gr[c] - std::exp(yr[c]) * total;
    }
  });
}

Var tanh(const Var& x) {
  return unary_elementwise(
      x, [](double v) { return std::tanh(v); },
      [](Node& n) {
        Tensor* dx = grad_of(n, 0);
        if (!dx) return;
        for (std::size_t i = 0; i < n.value.size(); ++i) {
          const double y = n.value[i];
          (*dx)[i] += n.grad[i] * (1.0 - y * y);
        }
      });
}

Var sigmoid(const Var& x) {
  return unary_elementwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](Node& n) {
        Tensor* dx = grad_of(n, 0);
        if (!dx) return;
        for (std::size_t i = 0; i < n.value.size(); ++i) {
          const double y = n.value[i];
          (*dx)[i] += n.grad[i] * y * (1.0 - y);
        }
      });
}

Var relu(const Var& x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](Node& n) {
        Tensor* dx = grad_of(n, 0);
        if (!dx) return;
        const Tensor& in = n.inputs[0]->value;
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (in[i] > 0.0) (*dx)[i] += n.grad[i];
        }
      });
}

namespace {

template <typename F>
Var binary_elementwise(const char* op, const Var& a, const Var& b, F&& f,
                       std::function<void(Node&)> bwd) {
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
  Tensor out = Tensor::zeros_like(a.value());
  const auto av = a.value().values();
  const auto bv = b.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(av[i], bv[i]);
  return record(std::move(out), {a, b}, std::move(bwd));
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary_elementwise(
      "elementwise_add", a, b, [](double x, double y) { return x + y; },
      [](Node& n) {
        if (Tensor* da = grad_of(n, 0)) *da += n.grad;
        if (Tensor* db = grad_of(n, 1)) *db += n.grad;
      });
}

Var sub(const Var& a, const Var& b) {
  return binary_elementwise(
      "elementwise_sub", a, b, [](double x, double y) { return x - y; },
      [](Node& n) {
        if (Tensor* da = grad_of(n, 0)) *da += n.grad;
        if (Tensor* db = grad_of(n, 1)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*db)[i] -= n.grad[i];
        }
      });
}

Var mul(const Var& a, const Var& b) {
  return binary_elementwise(
      "elementwise_mul", a, b, [](double x, double y) { return x * y; },
      [](Node& n) {
        const Tensor& av = n.inputs[0]->value;
        const Tensor& bv = n.inputs[1]->value;
        if (Tensor* da = grad_of(n, 0)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*da)[i] += n.grad[i] * bv[i];
        }
        if (Tensor* db = grad_of(n, 1)) {
          for (std::size_t i = 0; i < n.grad.size(); ++i) (*db)[i] += n.grad[i] * av[i];
        }
      });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() == 1 && B.rank() == 1) shape_fail("matmul", A.shape(), B.shape());
  const std::size_t ra = A.rows(), k = A.cols();
  const std::size_t kb = B.rank() == 2 ? B.shape()[0] : B.size();
  const std::size_t cb = B.rank() == 2 ? B.shape()[1] : 1;
  if (k != kb) shape_fail("matmul", A.shape(), B.shape());
  Shape out_shape;
  if (A.rank() == 1) {
    out_shape = {cb};
  } else if (B.rank() == 1) {
    out_shape = {ra};
  } else {
    out_shape = {ra, cb};
  }
  Tensor out(out_shape);
  auto o = out.values();
  const auto av = A.values();
  const auto bv = B.values();
  for (std::size_t r = 0; r < ra; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      const double x = av[r * k + j];
      for (std::size_t c = 0; c < cb; ++c) o[r * cb + c] += x * bv[j * cb + c];
    }
  }
  return record(std::move(out), {a, b}, [ra, k, cb](Node& n) {
    const auto av = n.inputs[0]->value.values();
    const auto bv = n.inputs[1]->value.values();
    const auto g = n.grad.values();
    if (Tensor* da = grad_of(n, 0)) {
      auto d = da->values();
      for (std::size_t r = 0; r < ra; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < cb; ++c) acc += g[r * cb + c] * bv[j * cb + c];
          d[r * k + j] += acc;
        }
      }
    }
    if (Tensor* db = grad_of(n, 1)) {
      auto d = db->values();
      for (std::size_t r = 0; r < ra; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
          const double x = av[r * k + j];
          for (std::size_t c = 0; c < cb; ++c) d[j * cb + c] += x * g[r * cb + c];
        }
      }
    }
  });
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return record(Tensor::scalar(total), {x}, [](Node& n) {
    Tensor* dx = grad_of(n, 0);
    if (!dx) return;
    const double g = n.grad[0];
    for (double& v : dx->values()) v += g;
  });
}

Var log_sum_exp(const Var& x) {
  const Tensor& X = x.value();
  const std::size_t rows = X.rows();
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) out[r] = row_log_sum_exp(X.row(r));
  return record(std::move(out), {x}, [](Node& n) {
    Tensor* dx = grad_of(n, 0);
    if (!dx) return;
    const Tensor& X = n.inputs[0]->value;
    for (std::size_t r = 0; r < X.rows(); ++r) {
      const double lse = n.value[r];
      const double g = n.grad[r];
      if (std::isinf(lse)) continue;
      const auto xr = X.row(r);
      auto d = dx->row(r);
      for (std::size_t c = 0; c < xr.size(); ++c) d[c] += g * std::exp(xr[c] - lse);
    }
  });
}

Var gather(const Var& x, std::span<const std::size_t> indices) {
  const Tensor& X = x.value();
  if (X.rank() != 1 || indices.empty()) shape_fail("gather", X.shape());
  std::vector<double> picked;
  picked.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= X.size()) {
      throw ShapeError("gather: index " + std::to_string(idx) + " out of range for " +
                       shape_string(X.shape()));
    }
    picked.push_back(X[idx]);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return record(Tensor::vector(std::move(picked)), {x}, [idx = std::move(idx)](Node& n) {
    Tensor* dx = grad_of(n, 0);
    if (!dx) return;
    for (std::size_t i = 0; i < idx.size(); ++i) (*dx)[idx[i]] += n.grad[i];
  });
}

Var gather(const Var& x, std::size_t index) {
  const std::size_t one[1] = {index};
  return gather(x, std::span<const std::size_t>(one));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<double> joined;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    if (p.value().rank() != 1) shape_fail("concat", p.shape());
    const auto v = p.value().values();
    joined.insert(joined.end(), v.begin(), v.end());
    sizes.push_back(v.size());
  }
  return record(Tensor::vector(std::move(joined)), std::vector<Var>(parts.begin(), parts.end()),
                [sizes = std::move(sizes)](Node& n) {
                  std::size_t offset = 0;
                  for (std::size_t i = 0; i < sizes.size(); ++i) {
                    if (Tensor* d = grad_of(n, i)) {
                      for (std::size_t j = 0; j < sizes[i]; ++j) (*d)[j] += n.grad[offset + j];
                    }
                    offset += sizes[i];
                  }
                });
}

Var stack(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("concat: stack of zero rows");
  const Shape& first = rows.front().shape();
  if (first.size() != 1) shape_fail("concat", first);
  const std::size_t width = first[0];
  std::vector<double> joined;
  joined.reserve(rows.size() * width);
  for (const auto& r : rows) {
    if (r.shape() != first) shape_fail("concat", first, r.shape());
    const auto v = r.value().values();
    joined.insert(joined.end(), v.begin(), v.end());
  }
  return record(Tensor::matrix(rows.size(), width, std::move(joined)),
                std::vector<Var>(rows.begin(), rows.end()), [width](Node& n) {
                  for (std::size_t i = 0; i < n.inputs.size(); ++i) {
                    if (Tensor* d = grad_of(n, i)) {
                      for (std::size_t j = 0; j < width; ++j) (*d)[j] += n.grad[i * width + j];
                    }
                  }
                });
}

Var scale(const Var& x, double factor) {
  return unary_elementwise(
      x, [factor](double v) { return v * factor; },
      [factor](Node& n) {
        Tensor* dx = grad_of(n, 0);
        if (!dx) return;
        for (std::size_t i = 0; i < n.grad.size(); ++i) (*dx)[i] += n.grad[i] * factor;
      });
}

}  // namespace cascadion
