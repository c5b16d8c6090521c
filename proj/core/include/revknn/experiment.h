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

#ifndef REVKNN_EXPERIMENT_H_
#define REVKNN_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revknn/corpus.h"
#include "revknn/datastore.h"
#include "revknn/evaluation.h"
#include "revknn/inference.h"
#include "revknn/io.h"
#include "revknn/pairbuilder.h"
#include "revknn/reviser.h"
#include "revknn/toymodel.h"

namespace revknn {

struct ReviserSettings {
  double alpha = 0.4;
  double r_percent = 30.0;
  std::uint32_t hidden = 32;  // 0: 4 * (2D + 2E)
  std::size_t epochs = 100;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  DistanceMode distance = DistanceMode::kSquared;
};

// Everything one end-to-end run needs, as a single JSON document with one
// section per stage. Stage seeds are not configurable on their own; they are
// derived from `seed` by stage name.
struct ExperimentConfig {
  GenConfig data;
  std::uint32_t emb_dim = 16;
  std::uint32_t repr_dim = 32;
  std::uint32_t window = 3;
  TrainConfig upstream_train{.epochs = 20, .lr = 1e-2, .batch_sentences = 16, .seed = 0};
  TrainConfig finetune{.epochs = 20, .lr = 5e-3, .batch_sentences = 16, .seed = 0};
  DecodeConfig decode;
  ReviserSettings reviser;
  std::vector<TokenId> skip_tokens;
  std::string output_dir = "runs/default";
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  // Absent fields keep their defaults; unknown fields are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  void validate() const;
  // SHA-256 of the canonical JSON dump.
  Fingerprint hash() const;

  // Stage configs with their derived seeds filled in.
  GenConfig gen_config() const;
  ModelDims model_dims(std::size_t src_vocab, std::size_t tgt_vocab) const;
  TrainConfig upstream_config() const;
  TrainConfig finetune_config() const;
  ReviserTrainConfig reviser_config() const;
};

// Stage names used for seed derivation.
namespace stage {
inline constexpr std::string_view kGenData = "gen-data";
inline constexpr std::string_view kTrainModel = "train-model";
inline constexpr std::string_view kFinetune = "finetune-model";
inline constexpr std::string_view kTrainReviser = "train-reviser";
}  // namespace stage

// Artifacts that do not depend on reviser settings: data, both models, both
// datastores over the downstream training corpus, and the collected stats.
struct PreparedRun {
  GeneratedData data;
  ToyModel upstream_model;
  ToyModel downstream_model;
  Datastore upstream_ds;
  Datastore downstream_ds;
  StatsTable stats;
  std::vector<std::uint64_t> value_freqs;
};

PreparedRun prepare_run(const ExperimentConfig& cfg);

struct RevisionRun {
  std::vector<std::size_t> retained;
  std::vector<TrainingRecord> records;
  ReviserTrainResult reviser;
  Fingerprint reviser_fingerprint{};
  Datastore revised_ds;
  double mean_delta_norm = 0.0;  // over training records
};

RevisionRun run_revision(const PreparedRun& prepared, const ExperimentConfig& cfg);

// Reviser config echo stored in the reviser file trailer.
std::string reviser_config_json(const ReviserTrainConfig& cfg, const Fingerprint& config_hash);

struct ExperimentResult {
  EvalReport vanilla;    // upstream model on the original datastore (dev)
  EvalReport revised;    // upstream model on the revised datastore (dev)
  EvalReport finetuned;  // downstream model on the downstream datastore (dev)
  EvalReport vanilla_translation;  // token accuracy on test
  EvalReport revised_translation;
  double domain_difference = 0.0;
  double mean_delta_norm = 0.0;
};

EvalReport eval_retrieval(const ToyModel& model, const Datastore& ds, const Corpus& corpus,
                          const ExperimentConfig& cfg);
EvalReport eval_translation(const ToyModel& model, const Datastore& ds, const Corpus& corpus,
                            const DecodeConfig& decode);

ExperimentResult evaluate_run(const PreparedRun& prepared, const RevisionRun& revision,
                              const ExperimentConfig& cfg);

}  // namespace revknn

#endif  // REVKNN_EXPERIMENT_H_
