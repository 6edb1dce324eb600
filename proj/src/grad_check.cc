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

#include "cascadion/grad_check.h"

#include <algorithm>
#include <cmath>

#include "cascadion/common.h"

namespace cascadion {

namespace {

double evaluate(const LossBuilder& loss_fn, const std::vector<Tensor>& params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(constant(p));
  const double value = loss_fn(vars).value().item();
  if (!std::isfinite(value)) throw Error("grad_check: loss is not finite");
  return value;
}

}  // namespace

GradCheckResult grad_check_detailed(const LossBuilder& loss_fn, std::span<const Tensor> params,
                                    double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw Error("grad_check: step must lie in (0, 1e-2]");

  GradTape tape;
  std::vector<Var> leaves;
  for (const auto& p : params) leaves.push_back(tape.parameter(p));
  Var loss = loss_fn(leaves);
  if (!std::isfinite(loss.value().item())) throw Error("grad_check: loss is not finite");
  const Gradients analytic = tape.backward(loss);

  GradCheckResult result;
  std::vector<Tensor> work(params.begin(), params.end());
  for (std::size_t p = 0; p < work.size(); ++p) {
    for (std::size_t i = 0; i < work[p].size(); ++i) {
      const double saved = work[p][i];
      auto at = [&](double offset) {
        work[p][i] = saved + offset;
        return evaluate(loss_fn, work);
      };
      // Five-point central stencil, fourth order in eps.
      const double numeric =
          (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
      work[p][i] = saved;
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double err = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = p;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

double grad_check(const LossBuilder& loss_fn, std::span<const Tensor> params, double eps) {
  return grad_check_detailed(loss_fn, params, eps).max_relative_error;
}

}  // namespace cascadion
