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

#ifndef REVKNN_TOYMODEL_H_
#define REVKNN_TOYMODEL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "revknn/corpus.h"
#include "revknn/distribution.h"
#include "revknn/io.h"
#include "revknn/vecmath.h"

namespace revknn {

struct ModelDims {
  std::uint32_t src_vocab = 0;
  std::uint32_t tgt_vocab = 0;
  std::uint32_t emb_dim = 16;   // E
  std::uint32_t repr_dim = 32;  // D, also the datastore key dim
  std::uint32_t window = 3;     // m

  std::size_t context_dim() const { return static_cast<std::size_t>(window + 1) * emb_dim; }
  void validate() const;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Parameter blocks, in on-disk order.
struct ToyParams {
  Matrix src_emb;   // |V_src| x E
  Matrix tgt_emb;   // |V_tgt| x E
  Matrix w_hidden;  // D x (m+1)E
  Vector b_hidden;  // D
  Matrix w_out;     // |V_tgt| x D
  Vector b_out;     // |V_tgt|

  static ToyParams zeros(const ModelDims& dims);
  ParamRefs refs();
  GradRefs crefs() const;

  friend bool operator==(const ToyParams&, const ToyParams&) = default;
};

struct ForwardResult {
  Vector repr;
  Distribution p_nmt;
};

// Fixed-window feed-forward translation model:
//   ctx  = [mean(src_emb[x]) ; tgt_emb[w_1] ; ... ; tgt_emb[w_m]]
//   repr = tanh(W_h ctx + b_h)
//   p    = softmax(W_o repr + b_o)
// where w_1..w_m are the last m tokens of (BOS, prefix...), left-padded
// with PAD.
class ToyModel {
 public:
  ToyModel() = default;
  ToyModel(ModelDims dims, ToyParams params);

  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases,
  // Uniform(-0.5, 0.5) embeddings.
  static ToyModel initialize(const ModelDims& dims, std::uint64_t seed);

  const ModelDims& dims() const noexcept { return dims_; }
  const ToyParams& params() const noexcept { return params_; }
  ToyParams& mutable_params() noexcept { return params_; }

  ForwardResult forward(std::span<const TokenId> src,
                        std::span<const TokenId> prefix) const;
  // forward(...).repr without the output layer.
  Vector represent(std::span<const TokenId> src, std::span<const TokenId> prefix) const;
  // Row v of the target input-embedding table (Emb(v)).
  Vector embed_value(TokenId v) const;

  // Hash of the stage config that produced the model; travels in the file.
  const Fingerprint& config_hash() const noexcept { return config_hash_; }
  void set_config_hash(const Fingerprint& h) { config_hash_ = h; }

  std::vector<std::uint8_t> serialize() const;
  static ToyModel deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static ToyModel load(const std::filesystem::path& path);
  // SHA-256 of serialize(), equal to the hash of the saved file.
  Fingerprint fingerprint() const;

  // Context vector fed to the hidden layer; exposed for training.
  std::vector<float> context(std::span<const TokenId> src,
                             std::span<const TokenId> prefix) const;
  void check_tokens(std::span<const TokenId> src, std::span<const TokenId> prefix) const;

  friend bool operator==(const ToyModel&, const ToyModel&) = default;

 private:
  ModelDims dims_;
  ToyParams params_;
  Fingerprint config_hash_{};
};

inline constexpr std::uint32_t kModelFileVersion = 1;

struct TrainConfig {
  std::size_t epochs = 20;
  double lr = 1e-2;
  std::size_t batch_sentences = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

// Teacher-forced cross-entropy, Adam over shuffled sentence mini-batches.
// `epoch_losses`, when given, receives the mean per-token loss of each epoch.
ToyModel train_model(const Corpus& corpus, const ModelDims& dims, const TrainConfig& cfg,
                     std::vector<double>* epoch_losses = nullptr);
// Continues training from `model`; zero epochs returns it unchanged.
ToyModel finetune_model(const ToyModel& model, const Corpus& corpus, const TrainConfig& cfg,
                        std::vector<double>* epoch_losses = nullptr);

double mean_cross_entropy(const ToyModel& model, const Corpus& corpus);
// Teacher-forced argmax accuracy over every target position.
double next_token_accuracy(const ToyModel& model, const Corpus& corpus);
// Throws ContractError when corpus ids fall outside the model vocabularies.
void check_compatible(const ToyModel& model, const Corpus& corpus);

}  // namespace revknn

#endif  // REVKNN_TOYMODEL_H_
