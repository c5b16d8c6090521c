// Copyright 2026 The revknn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "revknn/pairbuilder.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "revknn/error.h"
#include "revknn/parallel.h"

namespace revknn {
namespace {

constexpr std::string_view kRecordFormat = "revknn-training-records";
constexpr std::uint32_t kRecordVersion = 1;

// Ranks by count/freq descending without dividing; ties to the lower index.
bool ranks_before(const KeyQueryStats& a, std::uint64_t freq_a, const KeyQueryStats& b,
                  std::uint64_t freq_b) {
  const auto lhs = static_cast<std::uint64_t>(a.count()) * freq_b;
  const auto rhs = static_cast<std::uint64_t>(b.count()) * freq_a;
  if (lhs != rhs) return lhs > rhs;
  return a.key_index < b.key_index;
}

}  // namespace

StatsTable collect(const ToyModel& model, const Datastore& ds, const Corpus& corpus,
                   std::size_t n_k, const CollectOptions& options) {
  require(!corpus.empty(), "collect: empty corpus");
  require(n_k >= 1, "collect: N_k must be at least 1");
  require(model.dims().repr_dim == ds.dim(), "collect: model dim != datastore dim");
  check_compatible(model, corpus);
  if (ds.model_fingerprint() != model.fingerprint()) {
    const std::string msg = "collect: datastore fingerprint " + to_hex(ds.model_fingerprint()) +
                            " does not match the downstream model " + to_hex(model.fingerprint());
    if (options.strict_fingerprint) throw FingerprintMismatch(msg);
    warn(msg);
  }

  const ExactIndex index(ds);
  std::vector<std::vector<std::vector<Neighbor>>> hits(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t s) {
    const auto& pair = corpus.pairs[s];
    hits[s].reserve(pair.tgt.size());
    for (std::size_t t = 0; t < pair.tgt.size(); ++t) {
      const Vector q = model.represent(pair.src, std::span(pair.tgt).first(t));
      hits[s].push_back(index.search(q, n_k));
    }
  });

  // traversal order makes every position list sorted and duplicate-free
  StatsTable stats;
  for (std::size_t s = 0; s < hits.size(); ++s) {
    for (std::size_t t = 0; t < hits[s].size(); ++t) {
      const Position pos{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(t)};
      for (const auto& n : hits[s][t]) {
        auto [it, inserted] = stats.try_emplace(n.index);
        if (inserted) {
          it->second.key_index = n.index;
          it->second.value = ds.value(n.index);
        }
        it->second.positions.push_back(pos);
      }
    }
  }
  return stats;
}

std::vector<std::uint64_t> value_frequencies(const Corpus& corpus, std::size_t vocab_size) {
  std::vector<std::uint64_t> freq(vocab_size, 0);
  for (const auto& pair : corpus.pairs) {
    for (TokenId t : pair.tgt) {
      require(t < vocab_size, "value_frequencies: token id out of range");
      ++freq[t];
    }
  }
  return freq;
}

std::vector<std::size_t> filter_keys(const StatsTable& stats,
                                     std::span<const std::uint64_t> value_freqs,
                                     double r_percent) {
  require(r_percent > 0.0 && r_percent <= 100.0, "filter: r must lie in (0, 100]");
  if (stats.empty()) return {};
  std::vector<const KeyQueryStats*> ranked;
  ranked.reserve(stats.size());
  for (const auto& [index, s] : stats) {
    require(s.value < value_freqs.size() && value_freqs[s.value] >= 1,
            "filter: value " + std::to_string(s.value) + " of key " + std::to_string(index) +
                " has zero frequency");
    ranked.push_back(&s);
  }
  std::sort(ranked.begin(), ranked.end(), [&](const KeyQueryStats* a, const KeyQueryStats* b) {
    return ranks_before(*a, value_freqs[a->value], *b, value_freqs[b->value]);
  });
  const double exact = r_percent * static_cast<double>(stats.size()) / 100.0;
  const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(exact + 0.5)), 1,
                                            stats.size());
  std::vector<std::size_t> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(ranked[i]->key_index);
  return out;
}

void check_parallel_stores(const Datastore& upstream, const Datastore& downstream) {
  if (upstream.size() != downstream.size()) {
    throw DataError(DataErrorKind::kCorruption,
                    "datastores differ in size (" + std::to_string(upstream.size()) + " vs " +
                        std::to_string(downstream.size()) + ")");
  }
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    if (upstream.sent_id(i) != downstream.sent_id(i) ||
        upstream.timestep(i) != downstream.timestep(i)) {
      throw DataError(DataErrorKind::kCorruption, "position grid mismatch at entry " + std::to_string(i));
    }
    if (upstream.value(i) != downstream.value(i)) {
      throw DataError(DataErrorKind::kCorruption, "value mismatch at entry " + std::to_string(i));
    }
  }
}

std::vector<TrainingRecord> build_training_set(std::span<const std::size_t> retained,
                                               const StatsTable& stats,
                                               const ToyModel& upstream_model,
                                               const Datastore& upstream_ds,
                                               const ToyModel& downstream_model,
                                               const Datastore& downstream_ds,
                                               const Corpus& corpus) {
  check_parallel_stores(upstream_ds, downstream_ds);
  check_compatible(upstream_model, corpus);
  require(upstream_model.dims().repr_dim == upstream_ds.dim(),
          "build_training_set: upstream model dim != datastore dim");

  // flat offset of each sentence's first position
  std::vector<std::size_t> offsets(corpus.size() + 1, 0);
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    offsets[s + 1] = offsets[s] + corpus.pairs[s].tgt.size();
  }
  auto flat = [&](const Position& p) {
    require(p.sent_id < corpus.size() && p.timestep < corpus.pairs[p.sent_id].tgt.size(),
            "build_training_set: position (" + std::to_string(p.sent_id) + ", " +
                std::to_string(p.timestep) + ") is not in the corpus");
    return offsets[p.sent_id] + p.timestep;
  };

  std::vector<const KeyQueryStats*> rows;
  std::vector<char> needed(offsets.back(), 0);
  for (std::size_t key : retained) {
    auto it = stats.find(key);
    require(it != stats.end(), "build_training_set: retained key " + std::to_string(key) +
                                   " has no collected queries");
    require(key < upstream_ds.size(), "build_training_set: key index out of range");
    for (const auto& p : it->second.positions) needed[flat(p)] = 1;
    rows.push_back(&it->second);
  }

  // upstream query representation for every needed position
  std::vector<Vector> queries(offsets.back());
  parallel_for(corpus.size(), [&](std::size_t s) {
    const auto& pair = corpus.pairs[s];
    for (std::size_t t = 0; t < pair.tgt.size(); ++t) {
      if (needed[offsets[s] + t]) {
        queries[offsets[s] + t] = upstream_model.represent(pair.src, std::span(pair.tgt).first(t));
      }
    }
  });

  const std::size_t dim = upstream_ds.dim();
  std::vector<TrainingRecord> out;
  out.reserve(rows.size());
  for (const KeyQueryStats* row : rows) {
    const std::size_t i = row->key_index;
    TrainingRecord rec;
    rec.key_index = i;
    rec.value = upstream_ds.value(i);
    const auto k = upstream_ds.key(i);
    const auto kp = downstream_ds.key(i);
    rec.k.assign(k.begin(), k.end());
    rec.k_prime.assign(kp.begin(), kp.end());
    rec.emb_v = upstream_model.embed_value(rec.value);
    rec.emb_v_prime = downstream_model.embed_value(rec.value);
    std::vector<double> sum(dim, 0.0);
    for (const auto& p : row->positions) {
      const auto& q = queries[flat(p)];
      for (std::size_t c = 0; c < dim; ++c) sum[c] += q[c];
    }
    rec.count = static_cast<std::uint32_t>(row->positions.size());
    rec.avg_q.resize(dim);
    for (std::size_t c = 0; c < dim; ++c) {
      rec.avg_q[c] = static_cast<float>(sum[c] / static_cast<double>(rec.count));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void save_records(std::span<const TrainingRecord> records, const RecordFileHeader& header,
                  const std::filesystem::path& path) {
  nlohmann::json head = {
      {"format", kRecordFormat},
      {"version", kRecordVersion},
      {"dim", header.dim},
      {"emb_dim", header.emb_dim},
      {"count", records.size()},
      {"upstream_model", to_hex(header.upstream_model)},
      {"downstream_model", to_hex(header.downstream_model)},
      {"config_hash", to_hex(header.config_hash)},
  };
  std::string text = head.dump() + "\n";
  for (const auto& r : records) {
    require(r.k.size() == header.dim && r.k_prime.size() == header.dim &&
                r.avg_q.size() == header.dim && r.emb_v.size() == header.emb_dim &&
                r.emb_v_prime.size() == header.emb_dim,
            "save_records: record dims disagree with header");
    nlohmann::json line = {
        {"key_index", r.key_index},
        {"value", r.value},
        {"count", r.count},
        {"k", encode_floats(r.k)},
        {"k_prime", encode_floats(r.k_prime)},
        {"emb_v", encode_floats(r.emb_v)},
        {"emb_v_prime", encode_floats(r.emb_v_prime)},
        {"avg_q", encode_floats(r.avg_q)},
    };
    text += line.dump();
    text.push_back('\n');
  }
  write_text_file(path, text);
}

std::vector<TrainingRecord> load_records(const std::filesystem::path& path,
                                         RecordFileHeader* header_out) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  RecordFileHeader header;
  std::vector<TrainingRecord> out;
  try {
    if (!std::getline(in, line)) throw DataError(DataErrorKind::kTruncated, path.string() + ": empty file");
    const auto head = nlohmann::json::parse(line);
    if (head.value("format", "") != kRecordFormat) {
      throw DataError(DataErrorKind::kBadMagic, path.string() + ": not a training-record file");
    }
    if (head.at("version").get<std::uint32_t>() != kRecordVersion) {
      throw DataError(DataErrorKind::kVersionMismatch, path.string());
    }
    header.dim = head.at("dim").get<std::uint32_t>();
    header.emb_dim = head.at("emb_dim").get<std::uint32_t>();
    header.count = head.at("count").get<std::uint64_t>();
    header.upstream_model = fingerprint_from_hex(head.at("upstream_model").get<std::string>());
    header.downstream_model = fingerprint_from_hex(head.at("downstream_model").get<std::string>());
    header.config_hash = fingerprint_from_hex(head.at("config_hash").get<std::string>());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      TrainingRecord r;
      r.key_index = j.at("key_index").get<std::size_t>();
      r.value = j.at("value").get<TokenId>();
      r.count = j.at("count").get<std::uint32_t>();
      r.k = decode_floats(j.at("k").get<std::string>());
      r.k_prime = decode_floats(j.at("k_prime").get<std::string>());
      r.emb_v = decode_floats(j.at("emb_v").get<std::string>());
      r.emb_v_prime = decode_floats(j.at("emb_v_prime").get<std::string>());
      r.avg_q = decode_floats(j.at("avg_q").get<std::string>());
      if (r.k.size() != header.dim || r.k_prime.size() != header.dim ||
          r.avg_q.size() != header.dim || r.emb_v.size() != header.emb_dim ||
          r.emb_v_prime.size() != header.emb_dim) {
        throw DataError(DataErrorKind::kInconsistentDimensions,
                        path.string() + ": record " + std::to_string(out.size()) +
                            " disagrees with header dims");
      }
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::kFormat, path.string() + ": " + e.what());
  }
  if (out.size() != header.count) {
    throw DataError(DataErrorKind::kTruncated, path.string() + ": header promises " +
                                                   std::to_string(header.count) + " records, found " +
                                                   std::to_string(out.size()));
  }
  if (header_out) *header_out = header;
  return out;
}

}  // namespace revknn
