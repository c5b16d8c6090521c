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

#ifndef REVKNN_RANDOM_H_
#define REVKNN_RANDOM_H_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace revknn {

// mt19937_64 with portable draws (the std distributions are
// implementation-defined, which would break cross-platform reproducibility).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, n); n > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Index drawn proportionally to non-negative weights.
  std::size_t weighted_index(std::span<const double> weights);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Named sub-seed: first 8 bytes (little-endian) of SHA-256 over the root seed
// and the stage name. Lets each stage be re-run in isolation.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage);

}  // namespace revknn

#endif  // REVKNN_RANDOM_H_
