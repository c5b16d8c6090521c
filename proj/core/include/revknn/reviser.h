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

#ifndef REVKNN_REVISER_H_
#define REVKNN_REVISER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "revknn/datastore.h"
#include "revknn/io.h"
#include "revknn/pairbuilder.h"
#include "revknn/toymodel.h"
#include "revknn/vecmath.h"

namespace revknn {

struct ReviserDims {
  std::uint32_t key_dim = 32;  // D
  std::uint32_t emb_dim = 16;  // E
  std::uint32_t hidden = 0;    // H; 0 means 4 * (2D + 2E)

  std::size_t input_dim() const { return 2 * static_cast<std::size_t>(key_dim + emb_dim); }
  std::uint32_t resolved_hidden() const;

  friend bool operator==(const ReviserDims&, const ReviserDims&) = default;
};

// Two-layer ReLU FFN: delta = W2 relu(W1 [k; k'; emb; emb'] + b1) + b2.
struct ReviserParams {
  Matrix w1;  // H x (2D + 2E)
  Vector b1;  // H
  Matrix w2;  // D x H
  Vector b2;  // D

  static ReviserParams zeros(const ReviserDims& dims);
  // Weights and biases Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
  static ReviserParams random(const ReviserDims& dims, std::uint64_t seed);

  ReviserDims dims() const;
  ParamRefs refs();
  GradRefs crefs() const;

  friend bool operator==(const ReviserParams&, const ReviserParams&) = default;
};

enum class DistanceMode { kSquared, kEuclidean };

std::string_view to_string(DistanceMode mode);
DistanceMode distance_mode_from_string(std::string_view text);

struct ReviserTrainConfig {
  double alpha = 0.4;
  double lr = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  DistanceMode distance = DistanceMode::kSquared;

  void validate() const;
};

Vector reviser_forward(const ReviserParams& params, std::span<const float> k,
                       std::span<const float> k_prime, std::span<const float> emb_v,
                       std::span<const float> emb_v_prime);

// d(k + delta, avg_q) + alpha * |delta|^2.
double reviser_loss(const ReviserParams& params, const TrainingRecord& record, double alpha,
                    DistanceMode mode = DistanceMode::kSquared);

// Gradient of the mean batch loss; ReLU'(0) = 0.
ReviserParams reviser_gradients(const ReviserParams& params,
                                std::span<const TrainingRecord> batch, double alpha,
                                DistanceMode mode = DistanceMode::kSquared);

struct ReviserTrainResult {
  ReviserParams params;
  std::vector<double> epoch_losses;  // mean per-record loss seen in each epoch
};

ReviserTrainResult train_reviser(std::span<const TrainingRecord> records,
                                 const ReviserDims& dims, const ReviserTrainConfig& cfg);

// Mean |delta k| over the records.
double mean_delta_norm(const ReviserParams& params, std::span<const TrainingRecord> records);

// k_hat_i = k_i + delta(k_i, k'_i, Emb(v_i), Emb'(v_i)) for every entry.
// Values and provenance are copied; the output is flagged revised and
// carries `reviser_fp`.
Datastore revise_datastore(const Datastore& upstream, const Datastore& downstream,
                           const ReviserParams& params, const ToyModel& upstream_model,
                           const ToyModel& downstream_model, const Fingerprint& reviser_fp);

inline constexpr std::uint32_t kReviserFileVersion = 1;

struct ReviserFile {
  ReviserParams params;
  std::string config_json;  // training config echo
};

std::vector<std::uint8_t> serialize_reviser(const ReviserParams& params,
                                            const std::string& config_json);
ReviserFile deserialize_reviser(std::span<const std::uint8_t> bytes);
void save_reviser(const ReviserParams& params, const std::string& config_json,
                  const std::filesystem::path& path);
ReviserFile load_reviser(const std::filesystem::path& path);

}  // namespace revknn

#endif  // REVKNN_REVISER_H_
