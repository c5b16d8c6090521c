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

#ifndef REVKNN_INFERENCE_H_
#define REVKNN_INFERENCE_H_

#include <cstddef>
#include <span>
#include <vector>

#include "revknn/datastore.h"
#include "revknn/distribution.h"
#include "revknn/toymodel.h"

namespace revknn {

struct DecodeConfig {
  double lambda = 0.5;
  double temperature = 0.3;
  std::size_t n_k = 8;
  std::size_t max_length = 64;

  void validate() const;
};

struct Retrieved {
  TokenId value = 0;
  double distance = 0.0;
};

// p(v) proportional to the sum of exp(-d_i / T) over retrieved pairs with
// value v; zero for every value not retrieved.
Distribution knn_distribution(std::span<const Retrieved> retrieved, double temperature,
                              std::size_t vocab_size);

// Neighbors of a datastore mapped to (value, distance).
std::vector<Retrieved> to_retrieved(const Datastore& ds, std::span<const Neighbor> neighbors);

// lambda * p_knn + (1 - lambda) * p_nmt. The endpoints return the
// corresponding input bit for bit.
Distribution interpolate(const Distribution& p_knn, const Distribution& p_nmt, double lambda);

// Greedy decoding with the model alone; EOS is not emitted.
std::vector<TokenId> greedy_decode(const ToyModel& model, std::span<const TokenId> src,
                                   std::size_t max_length);

// Greedy decoding over the interpolated distribution. Stops at EOS or after
// cfg.max_length tokens; EOS is not emitted.
std::vector<TokenId> translate(const ToyModel& model, const SearchIndex& index,
                               const Datastore& ds, std::span<const TokenId> src,
                               const DecodeConfig& cfg);
std::vector<TokenId> translate(const ToyModel& model, const Datastore& ds,
                               std::span<const TokenId> src, const DecodeConfig& cfg);

}  // namespace revknn

#endif  // REVKNN_INFERENCE_H_
