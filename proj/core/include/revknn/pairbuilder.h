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

#ifndef REVKNN_PAIRBUILDER_H_
#define REVKNN_PAIRBUILDER_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "revknn/corpus.h"
#include "revknn/datastore.h"
#include "revknn/io.h"
#include "revknn/toymodel.h"
#include "revknn/vecmath.h"

namespace revknn {

// A target position of a corpus: the (sentence, 0-based timestep) grid that
// every datastore built over that corpus shares.
struct Position {
  std::uint32_t sent_id = 0;
  std::uint32_t timestep = 0;

  friend auto operator<=>(const Position&, const Position&) = default;
};

// Queries that retrieved one downstream key.
struct KeyQueryStats {
  std::size_t key_index = 0;
  TokenId value = 0;                // value of the key in the datastore
  std::vector<Position> positions;  // sorted, unique

  std::size_t count() const noexcept { return positions.size(); }
  friend bool operator==(const KeyQueryStats&, const KeyQueryStats&) = default;
};

// Keyed by datastore entry index. Keys that were never retrieved are absent.
using StatsTable = std::map<std::size_t, KeyQueryStats>;

struct CollectOptions {
  // Throw FingerprintMismatch instead of warning when the datastore was not
  // produced by the given model.
  bool strict_fingerprint = false;
};

// Re-traverses `corpus` with the downstream model; each position's query
// retrieves n_k keys from `ds`, and the position is recorded on each.
StatsTable collect(const ToyModel& model, const Datastore& ds, const Corpus& corpus,
                   std::size_t n_k, const CollectOptions& options = {});

// Occurrences of each target id over the corpus target side (EOS included).
std::vector<std::uint64_t> value_frequencies(const Corpus& corpus, std::size_t vocab_size);

// Keeps the top max(1, round_half_up(r% of |stats|)) keys ranked by
// count / freq(value), ties to the lower key index. Returned in rank order.
std::vector<std::size_t> filter_keys(const StatsTable& stats,
                                     std::span<const std::uint64_t> value_freqs,
                                     double r_percent);

struct TrainingRecord {
  std::size_t key_index = 0;
  TokenId value = 0;
  Vector k;        // upstream key
  Vector k_prime;  // downstream key
  Vector emb_v;    // upstream Emb(v)
  Vector emb_v_prime;
  Vector avg_q;    // mean upstream representation over the querying positions
  std::uint32_t count = 0;

  friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

// Maps retained downstream keys and their queries to upstream counterparts.
// Both stores must share the (sent_id, timestep) grid and value column.
std::vector<TrainingRecord> build_training_set(std::span<const std::size_t> retained,
                                               const StatsTable& stats,
                                               const ToyModel& upstream_model,
                                               const Datastore& upstream_ds,
                                               const ToyModel& downstream_model,
                                               const Datastore& downstream_ds,
                                               const Corpus& corpus);

// Verifies the shared grid; throws DataError(kCorruption) on a mismatch.
void check_parallel_stores(const Datastore& upstream, const Datastore& downstream);

struct RecordFileHeader {
  std::uint32_t dim = 0;
  std::uint32_t emb_dim = 0;
  std::uint64_t count = 0;
  Fingerprint upstream_model{};
  Fingerprint downstream_model{};
  Fingerprint config_hash{};
};

// JSON-lines: a header line, then one record per line with base64 f32 arrays.
void save_records(std::span<const TrainingRecord> records, const RecordFileHeader& header,
                  const std::filesystem::path& path);
std::vector<TrainingRecord> load_records(const std::filesystem::path& path,
                                         RecordFileHeader* header = nullptr);

}  // namespace revknn

#endif  // REVKNN_PAIRBUILDER_H_
