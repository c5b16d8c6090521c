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

#ifndef REVKNN_TESTS_HELPERS_H_
#define REVKNN_TESTS_HELPERS_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "oracle/oracle.h"
#include "revknn/corpus.h"
#include "revknn/pairbuilder.h"
#include "revknn/random.h"
#include "revknn/reviser.h"
#include "revknn/vecmath.h"

namespace revknn::testing {

inline Vector random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

inline TrainingRecord random_record(Rng& rng, std::size_t d, std::size_t e) {
  TrainingRecord r;
  r.k = random_vector(rng, d);
  r.k_prime = random_vector(rng, d);
  r.emb_v = random_vector(rng, e);
  r.emb_v_prime = random_vector(rng, e);
  r.avg_q = random_vector(rng, d);
  r.count = 1;
  return r;
}

// Random records whose hidden pre-activations all stay at least 2h away from
// the ReLU kink, so a central difference with step h never crosses it. Inputs
// lie in [-1, 1], so a step of h moves a pre-activation by at most h.
inline std::vector<TrainingRecord> fd_safe_batch(Rng& rng, const ReviserParams& p, std::size_t n,
                                                 double h) {
  const auto dims = p.dims();
  std::vector<TrainingRecord> batch;
  while (batch.size() < n) {
    auto r = random_record(rng, dims.key_dim, dims.emb_dim);
    if (oracle::min_abs_preactivation(p, std::span(&r, 1)) > 2.0 * h) batch.push_back(std::move(r));
  }
  return batch;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("revknn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Vocab numbered_vocab(std::size_t n, const std::string& prefix) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n; ++i) tokens.push_back(prefix + std::to_string(i));
  return Vocab::with_reserved(tokens);
}

// Max over coordinates of |a - n| / max(|a|, |n|, floor).
inline double max_relative_error(std::span<const float> analytic, std::span<const double> numeric,
                                 double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double scale = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / scale);
  }
  return worst;
}

// Small generator config used where the default sizes would be slow.
inline GenConfig small_gen(std::uint64_t seed = 7) {
  GenConfig g;
  g.source_vocab = 30;
  g.lexicon_size = 30;
  g.upstream_sentences = 60;
  g.downstream_train = 30;
  g.downstream_dev = 10;
  g.downstream_test = 10;
  g.min_length = 3;
  g.max_length = 6;
  g.seed = seed;
  return g;
}

}  // namespace revknn::testing

#endif  // REVKNN_TESTS_HELPERS_H_
