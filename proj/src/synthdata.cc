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

#include "cascadion/synthdata.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "cascadion/common.h"

namespace cascadion {

std::string_view to_string(Domain domain) { return domain == Domain::kIn ? "in" : "out"; }

Domain domain_from_string(std::string_view name) {
  if (name == "in") return Domain::kIn;
  if (name == "out") return Domain::kOut;
  throw FormatError("unknown domain '" + std::string(name) + "'");
}

void TaskSpec::validate() const {
  if (transcript_vocab < 1 || translation_vocab < 1) throw Error("task: vocabularies must be non-empty");
  std::vector<bool> used(transcript_vocab, false);
  for (const auto& [a, b] : homophone_pairs) {
    if (a < 0 || b < 0 || a >= transcript_vocab || b >= transcript_vocab) {
      throw Error("task: homophone pair (" + std::to_string(a) + ", " + std::to_string(b) +
                  ") outside a transcript vocabulary of " + std::to_string(transcript_vocab));
    }
    if (a == b || used[a] || used[b]) throw Error("task: homophone pairs must be disjoint");
    used[a] = used[b] = true;
  }
  if (2 * static_cast<int>(homophone_pairs.size()) >= transcript_vocab) {
    throw Error("task: transcript vocabulary too small for the homophone set");
  }
  if (noise < 0.0) throw Error("task: noise must be >= 0");
  if (min_len < 2 || max_len < min_len) throw Error("task: need 2 <= min_len <= max_len");
  if (d_feat < 1 || frames_per_token < 1) throw Error("task: d_feat and frames_per_token must be >= 1");
  for (double rate : {homophone_rate, context_agreement, in_domain_rate, style_mismatch}) {
    if (rate < 0.0 || rate > 1.0) throw Error("task: rates must lie in [0, 1]");
  }
  if (channel_shift < 0.0 || num_swap_triggers < 0) throw Error("task: negative parameter");
}

namespace {

std::vector<double> random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

TaskRules make_rules(const TaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(stream_seed(seed, 0));
  const int V = spec.transcript_vocab;
  TaskRules rules;

  rules.homophone_partner.assign(V, -1);
  for (const auto& [a, b] : spec.homophone_pairs) {
    rules.homophone_partner[a] = b;
    rules.homophone_partner[b] = a;
  }
  rules.acoustic_class.assign(V, -1);
  int classes = 0;
  for (int f = 0; f < V; ++f) {
    const int partner = rules.homophone_partner[f];
    if (partner >= 0 && partner < f) {
      rules.acoustic_class[f] = rules.acoustic_class[partner];
    } else {
      rules.acoustic_class[f] = classes++;
    }
  }
  for (int c = 0; c < classes; ++c) rules.class_embedding.push_back(random_unit(rng, spec.d_feat));
  rules.channel_offset = random_unit(rng, spec.d_feat);
  for (double& v : rules.channel_offset) v *= spec.channel_shift;

  std::vector<int> perm(spec.translation_vocab);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  rules.out_domain_map.resize(V);
  for (int f = 0; f < V; ++f) rules.out_domain_map[f] = perm[f % spec.translation_vocab];

  rules.in_domain_map = rules.out_domain_map;
  std::vector<int> order(V);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int restyled = static_cast<int>(std::lround(spec.style_mismatch * V));
  if (spec.translation_vocab > 1) {
    std::uniform_int_distribution<int> shift(1, spec.translation_vocab - 1);
    for (int i = 0; i < restyled; ++i) {
      const int f = order[i];
      rules.in_domain_map[f] = (rules.out_domain_map[f] + shift(rng)) % spec.translation_vocab;
    }
  }

  std::vector<int> plain;
  for (int f = 0; f < V; ++f) {
    if (rules.homophone_partner[f] < 0) plain.push_back(f);
  }
  std::shuffle(plain.begin(), plain.end(), rng);
  rules.swap_trigger.assign(V, false);
  for (int i = 0; i < std::min<int>(spec.num_swap_triggers, static_cast<int>(plain.size())); ++i) {
    rules.swap_trigger[plain[i]] = true;
  }
  return rules;
}

std::vector<int> translate(const TaskRules& rules, const std::vector<int>& transcript, Domain domain) {
  const auto& map = domain == Domain::kIn ? rules.in_domain_map : rules.out_domain_map;
  std::vector<int> out;
  out.reserve(transcript.size());
  for (int f : transcript) out.push_back(map.at(f));
  for (std::size_t j = 0; j + 1 < transcript.size();) {
    if (rules.swap_trigger[transcript[j]]) {
      std::swap(out[j], out[j + 1]);
      j += 2;
    } else {
      ++j;
    }
  }
  return out;
}

Vocabulary transcript_vocabulary(const TaskSpec& spec) {
  std::vector<std::string> tokens;
  for (int i = 0; i < spec.transcript_vocab; ++i) tokens.push_back("f" + std::to_string(i));
  return Vocabulary(tokens);
}

Vocabulary translation_vocabulary(const TaskSpec& spec) {
  std::vector<std::string> tokens;
  for (int i = 0; i < spec.translation_vocab; ++i) tokens.push_back("e" + std::to_string(i));
  return Vocabulary(tokens);
}

Dataset Dataset::filter(Domain domain) const {
  Dataset out{transcript_vocab, translation_vocab, {}};
  for (const auto& ex : examples) {
    if (ex.domain == domain) out.examples.push_back(ex);
  }
  return out;
}

std::uint64_t Dataset::fingerprint() const {
  std::string bytes;
  for (const auto& ex : examples) {
    bytes += ex.id;
    bytes += to_string(ex.domain);
    for (int t : ex.transcript) bytes += std::to_string(t) + ",";
    bytes += "|";
    for (int t : ex.translation) bytes += std::to_string(t) + ",";
    const auto frames = ex.x.frames.values();
    bytes.append(reinterpret_cast<const char*>(frames.data()), frames.size() * sizeof(double));
  }
  return fnv1a64(bytes);
}

namespace {

std::vector<int> sample_transcript(const TaskSpec& spec, const TaskRules& rules,
                                   std::mt19937_64& rng) {
  std::uniform_int_distribution<int> length(spec.min_len, spec.max_len);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int L = length(rng);
  std::vector<int> plain;
  for (int f = 0; f < spec.transcript_vocab; ++f) {
    if (rules.homophone_partner[f] < 0) plain.push_back(f);
  }
  const bool ambiguous = !spec.homophone_pairs.empty() && unit(rng) < spec.homophone_rate;
  const int forced = ambiguous ? std::uniform_int_distribution<int>(0, L - 1)(rng) : -1;

  auto resolve = [&](const std::pair<int, int>& pair, int prev) {
    const bool first_preferred = prev < 0 || prev % 2 == 0;
    const int preferred = first_preferred ? pair.first : pair.second;
    const int other = first_preferred ? pair.second : pair.first;
    return unit(rng) < spec.context_agreement ? preferred : other;
  };

  std::vector<int> f;
  f.reserve(L);
  for (int j = 0; j < L; ++j) {
    const int prev = j == 0 ? -1 : f.back();
    int token;
    if (j == forced) {
      const auto& pair = spec.homophone_pairs[std::uniform_int_distribution<std::size_t>(
          0, spec.homophone_pairs.size() - 1)(rng)];
      token = resolve(pair, prev);
    } else if (ambiguous) {
      token = std::uniform_int_distribution<int>(0, spec.transcript_vocab - 1)(rng);
      const int partner = rules.homophone_partner[token];
      if (partner >= 0) token = resolve({std::min(token, partner), std::max(token, partner)}, prev);
    } else {
      token = plain[std::uniform_int_distribution<std::size_t>(0, plain.size() - 1)(rng)];
    }
    f.push_back(token);
  }
  return f;
}

TripletExample sample_example(const TaskSpec& spec, const TaskRules& rules, Domain domain,
                              std::string id, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::vector<int> f = sample_transcript(spec, rules, rng);
  const std::vector<int> e = translate(rules, f, domain);

  const std::size_t T = f.size() * spec.frames_per_token;
  Tensor frames({T, static_cast<std::size_t>(spec.d_feat)});
  std::size_t t = 0;
  for (int token : f) {
    const auto& emb = rules.class_embedding[rules.acoustic_class[token]];
    for (int k = 0; k < spec.frames_per_token; ++k, ++t) {
      auto row = frames.row(t);
      for (int c = 0; c < spec.d_feat; ++c) {
        double v = emb[c];
        if (spec.noise > 0.0) v += spec.noise * noise(rng);
        if (domain == Domain::kIn) v += rules.channel_offset[c];
        row[c] = v;
      }
    }
  }

  TripletExample ex;
  ex.id = std::move(id);
  ex.domain = domain;
  ex.x.frames = std::move(frames);
  for (int token : f) ex.transcript.push_back(token + Vocabulary::kNumReserved);
  for (int token : e) ex.translation.push_back(token + Vocabulary::kNumReserved);
  return ex;
}

Dataset sample_split(const TaskSpec& spec, const TaskRules& rules, std::size_t n,
                     const std::string& name, bool in_domain_only, std::uint64_t seed,
                     std::uint64_t stream) {
  std::mt19937_64 rng(stream_seed(seed, stream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset d{transcript_vocabulary(spec), translation_vocabulary(spec), {}};
  d.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Domain domain =
        in_domain_only || unit(rng) < spec.in_domain_rate ? Domain::kIn : Domain::kOut;
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%06zu", name.c_str(), i);
    d.examples.push_back(sample_example(spec, rules, domain, id, rng));
  }
  return d;
}

}  // namespace

DatasetSplits generate_dataset(const TaskSpec& spec, std::size_t n_train, std::size_t n_valid,
                               std::size_t n_test, std::uint64_t seed) {
  if (n_train < 1 || n_valid < 1 || n_test < 1) throw Error("generate_dataset: every split needs >= 1 example");
  const TaskRules rules = make_rules(spec, seed);
  DatasetSplits splits;
  splits.train = sample_split(spec, rules, n_train, "train", false, seed, 1);
  splits.valid = sample_split(spec, rules, n_valid, "valid", false, seed, 2);
  splits.test = sample_split(spec, rules, n_test, "test", true, seed, 3);
  return splits;
}

void write_jsonl(const Dataset& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("write_jsonl: cannot write " + path.string());
  for (const auto& ex : split.examples) {
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t t = 0; t < ex.x.num_frames(); ++t) {
      const auto r = ex.x.frames.row(t);
      frames.push_back(std::vector<double>(r.begin(), r.end()));
    }
    nlohmann::json line = {{"id", ex.id},
                           {"domain", std::string(to_string(ex.domain))},
                           {"frames", std::move(frames)},
                           {"transcript", split.transcript_vocab.decode(ex.transcript)},
                           {"translation", split.translation_vocab.decode(ex.translation)}};
    out << line.dump() << '\n';
  }
  if (!out) throw Error("write_jsonl: write failed for " + path.string());
}

namespace {

std::vector<int> strict_encode(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                               const std::string& field) {
  std::vector<int> ids;
  for (const auto& t : tokens) {
    if (!vocab.contains(t)) throw FormatError("unknown " + field + " token '" + t + "'");
    ids.push_back(vocab.id(t));
  }
  return ids;
}

}  // namespace

Dataset read_jsonl(const std::filesystem::path& path, const Vocabulary& transcript_vocab,
                   const Vocabulary& translation_vocab) {
  std::ifstream in(path);
  if (!in) throw Error("read_jsonl: cannot open " + path.string());
  Dataset d{transcript_vocab, translation_vocab, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TripletExample ex;
      ex.id = j.at("id").get<std::string>();
      ex.domain = domain_from_string(j.at("domain").get<std::string>());
      const auto frames = j.at("frames").get<std::vector<std::vector<double>>>();
      if (frames.empty() || frames[0].empty()) throw FormatError("empty frames");
      const std::size_t width = frames[0].size();
      std::vector<double> flat;
      for (const auto& r : frames) {
        if (r.size() != width) throw FormatError("ragged frames");
        flat.insert(flat.end(), r.begin(), r.end());
      }
      ex.x.frames = Tensor::matrix(frames.size(), width, std::move(flat));
      ex.transcript = strict_encode(transcript_vocab,
                                    j.at("transcript").get<std::vector<std::string>>(), "transcript");
      ex.translation = strict_encode(
          translation_vocab, j.at("translation").get<std::vector<std::string>>(), "translation");
      d.examples.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return d;
}

}  // namespace cascadion
