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

#ifndef CASCADION_GRAD_CHECK_H_
#define CASCADION_GRAD_CHECK_H_

#include <functional>
#include <span>
#include <vector>

#include "cascadion/autodiff.h"

namespace cascadion {

/// Builds a scalar loss from parameter handles. Must be deterministic.
using LossBuilder = std::function<Var(std::span<const Var> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares tape gradients with central differences
/// (f(w + eps) - f(w - eps)) / 2 eps over every coordinate of every parameter.
/// The error of a coordinate is |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
GradCheckResult grad_check_detailed(const LossBuilder& loss_fn, std::span<const Tensor> params,
                                    double eps);

/// Maximum relative error; see grad_check_detailed.
double grad_check(const LossBuilder& loss_fn, std::span<const Tensor> params, double eps = 1e-5);

}  // namespace cascadion

#endif  // CASCADION_GRAD_CHECK_H_
