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

#ifndef CASCADION_ADAM_H_
#define CASCADION_ADAM_H_

#include <cstdint>
#include <vector>

#include "cascadion/tensor.h"

namespace cascadion {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

/// One Adam update with bias correction. Moments are zero-initialized on the
/// first call. A non-finite gradient rejects the whole step: parameters and
/// state are left untouched and false is returned.
bool adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace cascadion

#endif  // CASCADION_ADAM_H_
