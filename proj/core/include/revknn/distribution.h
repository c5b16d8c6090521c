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

#ifndef REVKNN_DISTRIBUTION_H_
#define REVKNN_DISTRIBUTION_H_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace revknn {

using TokenId = std::uint32_t;

// Probability vector over the target vocabulary.
struct Distribution {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  // Most probable token; ties go to the lowest id.
  TokenId argmax() const;
  // Entries in [0,1] and sum within `tolerance` of 1.
  bool is_valid(double tolerance = 1e-6) const;
};

}  // namespace revknn

#endif  // REVKNN_DISTRIBUTION_H_
