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

#ifndef REVKNN_EVALUATION_H_
#define REVKNN_EVALUATION_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revknn/corpus.h"
#include "revknn/datastore.h"
#include "revknn/toymodel.h"

namespace revknn {

struct EvalReport {
  std::optional<double> retrieval_accuracy;
  std::optional<double> token_accuracy;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

// Teacher-forced retrieval accuracy: at each position whose gold token is not
// in `skip`, the kNN distribution's argmax must equal the gold token.
EvalReport retrieval_accuracy(const ToyModel& model, const Datastore& ds,
                              const Corpus& corpus, std::span<const TokenId> skip,
                              std::size_t n_k, double temperature);

// Matches at aligned positions over sum of max(|hyp|, |ref|).
double token_accuracy(const std::vector<std::vector<TokenId>>& hypotheses,
                      const std::vector<std::vector<TokenId>>& references);

// 1 - cosine between the corpora's mean target-side TF-IDF vectors.
// tf = raw count in the sentence, idf = ln((1 + N) / (1 + df)) + 1 over the
// N sentences of both corpora. Reserved tokens are ignored.
double domain_difference(const Corpus& a, const Corpus& b);

}  // namespace revknn

#endif  // REVKNN_EVALUATION_H_
