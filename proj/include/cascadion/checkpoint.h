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

#ifndef CASCADION_CHECKPOINT_H_
#define CASCADION_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <optional>

#include "cascadion/model.h"

namespace cascadion {

/// On-disk layout:
///   "CSCD" | u32 version | u64 header length | canonical JSON header |
///   little-endian f64 payload of every tensor in header order.
inline constexpr char kCheckpointMagic[4] = {'C', 'S', 'C', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const SeqModel& model, const std::filesystem::path& path);

SeqModel load_checkpoint(const std::filesystem::path& path);

/// Loads and rejects checkpoints whose vocabularies differ from the expected ones.
SeqModel load_checkpoint(const std::filesystem::path& path,
                         const std::optional<Vocabulary>& expected_source,
                         const Vocabulary& expected_target);

}  // namespace cascadion

#endif  // CASCADION_CHECKPOINT_H_
