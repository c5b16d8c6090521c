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

#ifndef REVKNN_DATASTORE_H_
#define REVKNN_DATASTORE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "revknn/corpus.h"
#include "revknn/io.h"
#include "revknn/toymodel.h"
#include "revknn/vecmath.h"

namespace revknn {

struct DatastoreEntry {
  Vector key;
  TokenId value = 0;
  std::uint32_t sent_id = 0;
  std::uint32_t timestep = 0;
};

// Key-value memory built by traversing a corpus under teacher forcing.
// Columns are stored separately; keys are one contiguous count x dim block.
// Immutable once DatastoreBuilder::finish() hands it out.
class Datastore {
 public:
  Datastore() = default;

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const float> key(std::size_t i) const {
    return {keys_.data() + i * dim_, dim_};
  }
  std::span<const float> keys() const noexcept { return keys_; }
  TokenId value(std::size_t i) const { return values_[i]; }
  std::uint32_t sent_id(std::size_t i) const { return sent_ids_[i]; }
  std::uint32_t timestep(std::size_t i) const { return timesteps_[i]; }
  const std::vector<TokenId>& values() const noexcept { return values_; }
  const std::vector<std::uint32_t>& sent_ids() const noexcept { return sent_ids_; }
  const std::vector<std::uint32_t>& timesteps() const noexcept { return timesteps_; }
  DatastoreEntry entry(std::size_t i) const;

  const std::string& domain() const noexcept { return domain_; }
  // SHA-256 of the model file whose representations are the keys. For a
  // revised store this is the upstream model.
  const Fingerprint& model_fingerprint() const noexcept { return model_fp_; }
  bool revised() const noexcept { return revised_; }
  const Fingerprint& reviser_fingerprint() const noexcept { return reviser_fp_; }

  friend bool operator==(const Datastore&, const Datastore&) = default;

 private:
  friend class DatastoreBuilder;

  std::uint32_t dim_ = 0;
  std::vector<float> keys_;
  std::vector<TokenId> values_;
  std::vector<std::uint32_t> sent_ids_;
  std::vector<std::uint32_t> timesteps_;
  std::string domain_;
  Fingerprint model_fp_{};
  bool revised_ = false;
  Fingerprint reviser_fp_{};
};

class DatastoreBuilder {
 public:
  DatastoreBuilder(std::uint32_t dim, std::string domain, const Fingerprint& model_fp);

  void reserve(std::size_t n);
  // Key must have `dim` entries, all finite; (sent_id, timestep) must not
  // repeat.
  void append(std::span<const float> key, TokenId value, std::uint32_t sent_id,
              std::uint32_t timestep);
  void mark_revised(const Fingerprint& reviser_fp);
  Datastore finish() &&;

 private:
  Datastore ds_;
  std::uint32_t last_sent_ = 0;
  std::uint32_t last_step_ = 0;
  bool has_last_ = false;
};

// One entry per target position of every sentence (EOS included), in
// sentence-major, timestep-minor order; key = model.represent(x, y_<t).
Datastore build_datastore(const ToyModel& model, const Corpus& corpus);

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Search backend. Results hold min(n_k, size) neighbors ordered by ascending
// distance, ties broken by lower entry index.
class SearchIndex {
 public:
  virtual ~SearchIndex() = default;
  virtual std::vector<Neighbor> search(std::span<const float> query,
                                       std::size_t n_k) const = 0;
  virtual std::uint32_t dim() const = 0;

  // Queries laid out row-major (count x dim); results in query order.
  std::vector<std::vector<Neighbor>> search_batch(std::span<const float> queries,
                                                  std::size_t n_k) const;
};

// Exhaustive L2 search over a datastore that must outlive the index.
class ExactIndex final : public SearchIndex {
 public:
  explicit ExactIndex(const Datastore& ds) : ds_(&ds) {}

  std::vector<Neighbor> search(std::span<const float> query, std::size_t n_k) const override;
  std::uint32_t dim() const override { return ds_->dim(); }

 private:
  const Datastore* ds_;
};

std::vector<Neighbor> search(const Datastore& ds, std::span<const float> query,
                             std::size_t n_k);

inline constexpr std::uint32_t kDatastoreFileVersion = 1;

std::vector<std::uint8_t> serialize_datastore(const Datastore& ds);
Datastore deserialize_datastore(std::span<const std::uint8_t> bytes);
void save_datastore(const Datastore& ds, const std::filesystem::path& path);
Datastore load_datastore(const std::filesystem::path& path);

}  // namespace revknn

#endif  // REVKNN_DATASTORE_H_
