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

#include "cascadion/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "cascadion/common.h"

namespace cascadion {

namespace {

using nlohmann::json;

template <typename T>
void put_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& offset, const std::string& what) {
  if (offset + sizeof(T) > in.size()) throw FormatError("checkpoint: truncated " + what);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  offset += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string describe_size(const std::optional<Vocabulary>& v) {
  return v ? std::to_string(v->size()) + " tokens" : "none";
}

}  // namespace

void save_checkpoint(const SeqModel& model, const std::filesystem::path& path) {
  json header;
  header["kind"] = std::string(to_string(model.kind()));
  header["d"] = model.d();
  header["d_feat"] = model.d_feat();
  header["source_vocab"] =
      model.source_vocab() ? json(model.source_vocab()->tokens()) : json(nullptr);
  header["target_vocab"] = model.target_vocab().tokens();
  json tensors = json::array();
  for (std::size_t i = 0; i < model.names().size(); ++i) {
    tensors.push_back({{"name", model.names()[i]}, {"shape", model.tensors()[i].shape()}});
  }
  header["tensors"] = std::move(tensors);
  const std::string header_text = header.dump();

  std::string blob(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(blob, kCheckpointVersion);
  put_le<std::uint64_t>(blob, header_text.size());
  blob += header_text;
  for (const auto& t : model.tensors()) {
    for (double v : t.values()) put_le<double>(blob, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("checkpoint: cannot write " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error("checkpoint: write failed for " + path.string());
}

SeqModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (blob.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(blob.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError("checkpoint: bad magic in " + path.string());
  }
  std::size_t offset = sizeof(kCheckpointMagic);
  const auto version = get_le<std::uint32_t>(blob, offset, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: format version " + std::to_string(version) + " found, expected " +
                      std::to_string(kCheckpointVersion));
  }
  const auto header_len = get_le<std::uint64_t>(blob, offset, "header length");
  if (offset + header_len > blob.size()) throw FormatError("checkpoint: truncated header");
  json header;
  try {
    header = json::parse(blob.substr(offset, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  offset += header_len;

  try {
    const ModelKind kind = model_kind_from_string(header.at("kind").get<std::string>());
    std::optional<Vocabulary> source;
    if (!header.at("source_vocab").is_null()) {
      source = Vocabulary::from_full_list(header.at("source_vocab").get<std::vector<std::string>>());
    }
    Vocabulary target =
        Vocabulary::from_full_list(header.at("target_vocab").get<std::vector<std::string>>());
    std::vector<std::string> names;
    std::vector<Tensor> tensors;
    for (const auto& entry : header.at("tensors")) {
      names.push_back(entry.at("name").get<std::string>());
      Shape shape = entry.at("shape").get<Shape>();
      Tensor t(shape);
      for (double& v : t.values()) v = get_le<double>(blob, offset, "payload");
      tensors.push_back(std::move(t));
    }
    if (offset != blob.size()) throw FormatError("checkpoint: trailing bytes after payload");
    return assemble_model(kind, std::move(source), std::move(target), header.at("d").get<int>(),
                          header.at("d_feat").get<int>(), std::move(names), std::move(tensors));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

SeqModel load_checkpoint(const std::filesystem::path& path,
                         const std::optional<Vocabulary>& expected_source,
                         const Vocabulary& expected_target) {
  SeqModel model = load_checkpoint(path);
  if (!(model.target_vocab() == expected_target)) {
    throw FormatError("checkpoint: target vocabulary mismatch, checkpoint has " +
                      std::to_string(model.target_vocab().size()) + " tokens, expected " +
                      std::to_string(expected_target.size()));
  }
  if (model.source_vocab() != expected_source) {
    throw FormatError("checkpoint: source vocabulary mismatch, checkpoint has " +
                      describe_size(model.source_vocab()) + ", expected " +
                      describe_size(expected_source));
  }
  return model;
}

}  // namespace cascadion
