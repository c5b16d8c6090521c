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

#include "revknn/datastore.h"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "revknn/error.h"
#include "revknn/parallel.h"

namespace revknn {
namespace {

constexpr std::string_view kDatastoreMagic = "KNND";
constexpr std::size_t kEntryTail = 3 * sizeof(std::uint32_t);  // value, sent_id, timestep
constexpr std::size_t kTrailer = 1 + std::tuple_size_v<Fingerprint>;
constexpr std::uint8_t kRevisedFlag = 0x1;

struct Candidate {
  double d2;
  std::size_t index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

}  // namespace

DatastoreEntry Datastore::entry(std::size_t i) const {
  require(i < size(), "Datastore::entry: index out of range");
  const auto k = key(i);
  return {Vector(k.begin(), k.end()), values_[i], sent_ids_[i], timesteps_[i]};
}

DatastoreBuilder::DatastoreBuilder(std::uint32_t dim, std::string domain,
                                   const Fingerprint& model_fp) {
  require(dim > 0, "DatastoreBuilder: dim must be positive");
  ds_.dim_ = dim;
  ds_.domain_ = std::move(domain);
  ds_.model_fp_ = model_fp;
}

void DatastoreBuilder::reserve(std::size_t n) {
  ds_.keys_.reserve(n * ds_.dim_);
  ds_.values_.reserve(n);
  ds_.sent_ids_.reserve(n);
  ds_.timesteps_.reserve(n);
}

void DatastoreBuilder::append(std::span<const float> key, TokenId value, std::uint32_t sent_id,
                              std::uint32_t timestep) {
  require(key.size() == ds_.dim_, "Datastore: key dim " + std::to_string(key.size()) +
                                      " != datastore dim " + std::to_string(ds_.dim_));
  require(all_finite(key), "Datastore: non-finite key");
  require(!has_last_ || sent_id > last_sent_ || (sent_id == last_sent_ && timestep > last_step_),
          "Datastore: entries must follow corpus traversal order without repeats");
  has_last_ = true;
  last_sent_ = sent_id;
  last_step_ = timestep;
  ds_.keys_.insert(ds_.keys_.end(), key.begin(), key.end());
  ds_.values_.push_back(value);
  ds_.sent_ids_.push_back(sent_id);
  ds_.timesteps_.push_back(timestep);
}

void DatastoreBuilder::mark_revised(const Fingerprint& reviser_fp) {
  ds_.revised_ = true;
  ds_.reviser_fp_ = reviser_fp;
}

Datastore DatastoreBuilder::finish() && { return std::move(ds_); }

Datastore build_datastore(const ToyModel& model, const Corpus& corpus) {
  check_compatible(model, corpus);
  std::vector<std::vector<Vector>> keys(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t s) {
    const auto& pair = corpus.pairs[s];
    keys[s].reserve(pair.tgt.size());
    for (std::size_t t = 0; t < pair.tgt.size(); ++t) {
      keys[s].push_back(model.represent(pair.src, std::span(pair.tgt).first(t)));
    }
  });
  DatastoreBuilder builder(model.dims().repr_dim, corpus.domain, model.fingerprint());
  builder.reserve(corpus.target_positions());
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& tgt = corpus.pairs[s].tgt;
    for (std::size_t t = 0; t < tgt.size(); ++t) {
      builder.append(keys[s][t], tgt[t], static_cast<std::uint32_t>(s),
                     static_cast<std::uint32_t>(t));
    }
  }
  return std::move(builder).finish();
}

std::vector<std::vector<Neighbor>> SearchIndex::search_batch(std::span<const float> queries,
                                                             std::size_t n_k) const {
  const std::size_t d = dim();
  require(queries.size() % d == 0, "search_batch: query block is not a multiple of dim");
  const std::size_t n = queries.size() / d;
  std::vector<std::vector<Neighbor>> out(n);
  parallel_for(n, [&](std::size_t q) { out[q] = search(queries.subspan(q * d, d), n_k); });
  return out;
}

std::vector<Neighbor> ExactIndex::search(std::span<const float> query, std::size_t n_k) const {
  require(query.size() == ds_->dim(), "search: query dim " + std::to_string(query.size()) +
                                          " != datastore dim " + std::to_string(ds_->dim()));
  require(n_k >= 1, "search: N_k must be at least 1");
  const std::size_t keep = std::min(n_k, ds_->size());
  // max-heap of the best `keep` candidates seen so far
  std::priority_queue<Candidate> heap;
  for (std::size_t i = 0; i < ds_->size(); ++i) {
    const Candidate c{squared_l2(query, ds_->key(i)), i};
    if (heap.size() < keep) {
      heap.push(c);
    } else if (c < heap.top()) {
      heap.pop();
      heap.push(c);
    }
  }
  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {heap.top().index, std::sqrt(heap.top().d2)};
    heap.pop();
  }
  return out;
}

std::vector<Neighbor> search(const Datastore& ds, std::span<const float> query, std::size_t n_k) {
  return ExactIndex(ds).search(query, n_k);
}

std::vector<std::uint8_t> serialize_datastore(const Datastore& ds) {
  ByteWriter w;
  w.magic(kDatastoreMagic);
  w.u32(kDatastoreFileVersion);
  w.u32(ds.dim());
  w.u64(ds.size());
  w.u32(static_cast<std::uint32_t>(ds.domain().size()));
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(ds.domain().data()), ds.domain().size()));
  w.bytes(ds.model_fingerprint());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    w.f32s(ds.key(i));
    w.u32(ds.value(i));
    w.u32(ds.sent_id(i));
    w.u32(ds.timestep(i));
  }
  w.u8(ds.revised() ? kRevisedFlag : 0);
  w.bytes(ds.reviser_fingerprint());
  return w.take();
}

Datastore deserialize_datastore(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kDatastoreMagic);
  const std::uint32_t version = r.u32();
  if (version != kDatastoreFileVersion) {
    throw DataError(DataErrorKind::kVersionMismatch,
                    "datastore file version " + std::to_string(version) + ", expected " +
                        std::to_string(kDatastoreFileVersion));
  }
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  const std::uint32_t tag_len = r.u32();
  const auto tag = r.bytes(tag_len);
  Fingerprint model_fp{};
  const auto fp_raw = r.bytes(model_fp.size());
  std::copy(fp_raw.begin(), fp_raw.end(), model_fp.begin());
  if (dim == 0) throw DataError(DataErrorKind::kInconsistentDimensions, "header dim is 0");

  if (r.remaining() < kTrailer) throw DataError(DataErrorKind::kTruncated, "missing datastore trailer");
  const std::size_t payload = r.remaining() - kTrailer;
  const std::size_t per_entry = static_cast<std::size_t>(dim) * sizeof(float) + kEntryTail;
  if (count > payload / per_entry || payload != count * per_entry) {
    // a payload that divides evenly into `count` records of another width
    // means the header dim disagrees with the key block
    if (count > 0 && payload % count == 0) {
      const std::size_t width = payload / count;
      if (width > kEntryTail && (width - kEntryTail) % sizeof(float) == 0) {
        throw DataError(DataErrorKind::kInconsistentDimensions,
                        "header dim " + std::to_string(dim) + " but key block sized for dim " +
                            std::to_string((width - kEntryTail) / sizeof(float)));
      }
    }
    if (payload < count * per_entry) {
      throw DataError(DataErrorKind::kTruncated,
                      "entry block has " + std::to_string(payload) + " bytes, header needs " +
                          std::to_string(count * per_entry));
    }
    throw DataError(DataErrorKind::kInconsistentDimensions,
                    "entry block larger than header dim/count describe");
  }

  DatastoreBuilder builder(dim, std::string(tag.begin(), tag.end()), model_fp);
  builder.reserve(count);
  std::vector<float> key(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    r.f32s(key);
    const TokenId value = r.u32();
    const std::uint32_t sent = r.u32();
    const std::uint32_t step = r.u32();
    try {
      builder.append(key, value, sent, step);
    } catch (const ContractError& e) {
      throw DataError(DataErrorKind::kCorruption, "entry " + std::to_string(i) + ": " + e.what());
    }
  }
  const std::uint8_t flags = r.u8();
  Fingerprint reviser_fp{};
  const auto rv_raw = r.bytes(reviser_fp.size());
  std::copy(rv_raw.begin(), rv_raw.end(), reviser_fp.begin());
  if (flags & kRevisedFlag) builder.mark_revised(reviser_fp);
  return std::move(builder).finish();
}

void save_datastore(const Datastore& ds, const std::filesystem::path& path) {
  write_file(path, serialize_datastore(ds));
}

Datastore load_datastore(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return deserialize_datastore(bytes);
  } catch (const DataError& e) {
    throw DataError(e.kind(), path.string() + ": " + e.detail());
  }
}

}  // namespace revknn
