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

#include "revknn/inference.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "revknn/error.h"
#include "revknn/vecmath.h"

namespace revknn {

TokenId Distribution::argmax() const {
  return static_cast<TokenId>(revknn::argmax(probs));
}

bool Distribution::is_valid(double tolerance) const {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) return false;
    total += p;
  }
  return !probs.empty() && std::abs(total - 1.0) <= tolerance;
}

void DecodeConfig::validate() const {
  require(lambda >= 0.0 && lambda <= 1.0, "DecodeConfig: lambda must lie in [0, 1]");
  require(temperature > 0.0, "DecodeConfig: temperature must be positive");
  require(n_k >= 1, "DecodeConfig: N_k must be at least 1");
  require(max_length >= 1, "DecodeConfig: max_length must be at least 1");
}

Distribution knn_distribution(std::span<const Retrieved> retrieved, double temperature,
                              std::size_t vocab_size) {
  require(!retrieved.empty(), "knn_distribution: no retrieved pairs");
  require(temperature > 0.0 && std::isfinite(temperature),
          "knn_distribution: temperature must be positive");
  std::vector<double> distances;
  distances.reserve(retrieved.size());
  for (const auto& r : retrieved) {
    require(r.value < vocab_size, "knn_distribution: value id " + std::to_string(r.value) +
                                      " outside vocabulary");
    require(std::isfinite(r.distance), "knn_distribution: non-finite distance");
    distances.push_back(r.distance);
  }
  // Normalize after summing per value, so no entry can round above 1.
  const double min_d = *std::min_element(distances.begin(), distances.end());
  Distribution out;
  out.probs.assign(vocab_size, 0.0);
  for (std::size_t i = 0; i < retrieved.size(); ++i) {
    out.probs[retrieved[i].value] += std::exp(-(distances[i] - min_d) / temperature);
  }
  double total = 0.0;
  for (double w : out.probs) total += w;
  for (double& p : out.probs) p /= total;
  return out;
}

std::vector<Retrieved> to_retrieved(const Datastore& ds, std::span<const Neighbor> neighbors) {
  std::vector<Retrieved> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back({ds.value(n.index), n.distance});
  return out;
}

Distribution interpolate(const Distribution& p_knn, const Distribution& p_nmt, double lambda) {
  require(p_knn.size() == p_nmt.size(), "interpolate: vocabulary size mismatch");
  require(lambda >= 0.0 && lambda <= 1.0, "interpolate: lambda must lie in [0, 1]");
  Distribution out;
  out.probs.resize(p_knn.size());
  for (std::size_t i = 0; i < out.probs.size(); ++i) {
    out.probs[i] = lambda * p_knn.probs[i] + (1.0 - lambda) * p_nmt.probs[i];
  }
  return out;
}

std::vector<TokenId> greedy_decode(const ToyModel& model, std::span<const TokenId> src,
                                   std::size_t max_length) {
  require(!src.empty(), "greedy_decode: empty source");
  std::vector<TokenId> out;
  while (out.size() < max_length) {
    const TokenId next = model.forward(src, out).p_nmt.argmax();
    if (next == kEos) break;
    out.push_back(next);
  }
  return out;
}

std::vector<TokenId> translate(const ToyModel& model, const SearchIndex& index,
                               const Datastore& ds, std::span<const TokenId> src,
                               const DecodeConfig& cfg) {
  cfg.validate();
  require(!src.empty(), "translate: empty source");
  require(model.dims().repr_dim == ds.dim() && index.dim() == ds.dim(),
          "translate: model representation dim " + std::to_string(model.dims().repr_dim) +
              " != datastore dim " + std::to_string(ds.dim()));
  require(!ds.empty() || cfg.lambda == 0.0, "translate: empty datastore");
  const std::size_t vocab = model.dims().tgt_vocab;
  std::vector<TokenId> out;
  while (out.size() < cfg.max_length) {
    const auto fwd = model.forward(src, out);
    TokenId next;
    if (cfg.lambda == 0.0) {
      next = fwd.p_nmt.argmax();
    } else {
      const auto neighbors = index.search(fwd.repr, cfg.n_k);
      const auto retrieved = to_retrieved(ds, neighbors);
      const auto p_knn = knn_distribution(retrieved, cfg.temperature, vocab);
      next = interpolate(p_knn, fwd.p_nmt, cfg.lambda).argmax();
    }
    if (next == kEos) break;
    out.push_back(next);
  }
  return out;
}

std::vector<TokenId> translate(const ToyModel& model, const Datastore& ds,
                               std::span<const TokenId> src, const DecodeConfig& cfg) {
  return translate(model, ExactIndex(ds), ds, src, cfg);
}

}  // namespace revknn
