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

#include "revknn/toymodel.h"

#include <cmath>
#include <numeric>
#include <string>

#include "revknn/error.h"
#include "revknn/random.h"

namespace revknn {
namespace {

constexpr std::string_view kModelMagic = "TOYM";

void fill_uniform(std::span<float> values, double bound, Rng& rng) {
  for (float& v : values) v = static_cast<float>(rng.uniform(-bound, bound));
}

// Working buffers for one teacher-forced position.
struct Activations {
  std::vector<float> ctx;
  std::vector<double> repr;
  std::vector<double> probs;
};

void run_forward(const ToyModel& model, std::span<const TokenId> src,
                 std::span<const TokenId> prefix, Activations& act) {
  const auto& p = model.params();
  const auto& d = model.dims();
  act.ctx = model.context(src, prefix);
  act.repr.assign(d.repr_dim, 0.0);
  for (std::size_t j = 0; j < d.repr_dim; ++j) {
    const auto row = p.w_hidden.row(j);
    double acc = p.b_hidden[j];
    for (std::size_t c = 0; c < row.size(); ++c) acc += static_cast<double>(row[c]) * act.ctx[c];
    act.repr[j] = std::tanh(acc);
  }
  std::vector<double> logits(d.tgt_vocab);
  for (std::size_t v = 0; v < d.tgt_vocab; ++v) {
    const auto row = p.w_out.row(v);
    double acc = p.b_out[v];
    for (std::size_t j = 0; j < row.size(); ++j) acc += static_cast<double>(row[j]) * act.repr[j];
    logits[v] = acc;
  }
  act.probs = softmax(logits);
}

// Adds d(-log p[gold]) for one position to `grads`; returns the loss.
double accumulate_position(const ToyModel& model, std::span<const TokenId> src,
                           std::span<const TokenId> prefix, TokenId gold, ToyParams& grads,
                           Activations& act) {
  const auto& p = model.params();
  const auto& d = model.dims();
  run_forward(model, src, prefix, act);
  const double loss = -std::log(std::max(act.probs[gold], 1e-300));

  std::vector<double> d_repr(d.repr_dim, 0.0);
  for (std::size_t v = 0; v < d.tgt_vocab; ++v) {
    const double dz = act.probs[v] - (v == gold ? 1.0 : 0.0);
    grads.b_out[v] += static_cast<float>(dz);
    auto g_row = grads.w_out.row(v);
    const auto w_row = p.w_out.row(v);
    for (std::size_t j = 0; j < d.repr_dim; ++j) {
      g_row[j] += static_cast<float>(dz * act.repr[j]);
      d_repr[j] += dz * w_row[j];
    }
  }
  std::vector<double> d_ctx(d.context_dim(), 0.0);
  for (std::size_t j = 0; j < d.repr_dim; ++j) {
    const double da = d_repr[j] * (1.0 - act.repr[j] * act.repr[j]);
    grads.b_hidden[j] += static_cast<float>(da);
    auto g_row = grads.w_hidden.row(j);
    const auto w_row = p.w_hidden.row(j);
    for (std::size_t c = 0; c < d_ctx.size(); ++c) {
      g_row[c] += static_cast<float>(da * act.ctx[c]);
      d_ctx[c] += da * w_row[c];
    }
  }
  const std::size_t e = d.emb_dim;
  const double inv_len = 1.0 / static_cast<double>(src.size());
  for (TokenId s : src) {
    auto g_row = grads.src_emb.row(s);
    for (std::size_t c = 0; c < e; ++c) g_row[c] += static_cast<float>(d_ctx[c] * inv_len);
  }
  // window slot i holds the token at offset (i - m) from the end of BOS+prefix
  const std::size_t m = d.window;
  const std::size_t hist = prefix.size() + 1;
  for (std::size_t i = 0; i < m; ++i) {
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(hist) - static_cast<std::ptrdiff_t>(m - i);
    TokenId tok = kPad;
    if (pos == 0) tok = kBos;
    else if (pos > 0) tok = prefix[static_cast<std::size_t>(pos - 1)];
    auto g_row = grads.tgt_emb.row(tok);
    for (std::size_t c = 0; c < e; ++c) g_row[c] += static_cast<float>(d_ctx[(i + 1) * e + c]);
  }
  return loss;
}

void zero(ToyParams& g) {
  for (auto ref : g.refs()) std::fill(ref.begin(), ref.end(), 0.0f);
}

ToyModel train_loop(ToyModel model, const Corpus& corpus, const TrainConfig& cfg,
                    std::vector<double>* epoch_losses) {
  cfg.validate();
  require(!corpus.empty(), "train: empty corpus");
  check_compatible(model, corpus);

  AdamState state;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  ToyParams grads = ToyParams::zeros(model.dims());
  Activations act;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_sentences) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_sentences);
      zero(grads);
      std::size_t batch_tokens = 0;
      for (std::size_t b = start; b < end; ++b) {
        const auto& pair = corpus.pairs[order[b]];
        for (std::size_t t = 0; t < pair.tgt.size(); ++t) {
          epoch_loss += accumulate_position(model, pair.src, std::span(pair.tgt).first(t),
                                            pair.tgt[t], grads, act);
          ++batch_tokens;
        }
      }
      epoch_tokens += batch_tokens;
      const float scale = 1.0f / static_cast<float>(batch_tokens);
      for (auto ref : grads.refs()) {
        for (float& g : ref) g *= scale;
      }
      adam_step(model.mutable_params().refs(), grads.crefs(), state, cfg.lr);
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / static_cast<double>(epoch_tokens));
  }
  return model;
}

}  // namespace

void ModelDims::validate() const {
  require(src_vocab > kNumReserved && tgt_vocab > kNumReserved,
          "ModelDims: vocabularies must hold more than the reserved tokens");
  require(emb_dim > 0 && repr_dim > 0 && window > 0, "ModelDims: dims must be positive");
}

ToyParams ToyParams::zeros(const ModelDims& d) {
  ToyParams p;
  p.src_emb = Matrix(d.src_vocab, d.emb_dim);
  p.tgt_emb = Matrix(d.tgt_vocab, d.emb_dim);
  p.w_hidden = Matrix(d.repr_dim, d.context_dim());
  p.b_hidden = Vector(d.repr_dim, 0.0f);
  p.w_out = Matrix(d.tgt_vocab, d.repr_dim);
  p.b_out = Vector(d.tgt_vocab, 0.0f);
  return p;
}

ParamRefs ToyParams::refs() {
  return {src_emb.flat(), tgt_emb.flat(), w_hidden.flat(), b_hidden, w_out.flat(), b_out};
}

GradRefs ToyParams::crefs() const {
  return {src_emb.flat(), tgt_emb.flat(), w_hidden.flat(), b_hidden, w_out.flat(), b_out};
}

ToyModel::ToyModel(ModelDims dims, ToyParams params) : dims_(dims), params_(std::move(params)) {
  dims_.validate();
  const ToyParams shape = ToyParams::zeros(dims_);
  const auto want = shape.crefs();
  const auto have = params_.crefs();
  for (std::size_t i = 0; i < want.size(); ++i) {
    require(want[i].size() == have[i].size(), "ToyModel: parameter block shape mismatch");
    require(all_finite(have[i]), "ToyModel: non-finite parameter");
  }
}

ToyModel ToyModel::initialize(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  ToyParams p = ToyParams::zeros(dims);
  Rng rng(seed);
  fill_uniform(p.src_emb.flat(), 0.5, rng);
  fill_uniform(p.tgt_emb.flat(), 0.5, rng);
  fill_uniform(p.w_hidden.flat(), 1.0 / std::sqrt(static_cast<double>(dims.context_dim())), rng);
  fill_uniform(p.w_out.flat(), 1.0 / std::sqrt(static_cast<double>(dims.repr_dim)), rng);
  return ToyModel(dims, std::move(p));
}

void ToyModel::check_tokens(std::span<const TokenId> src, std::span<const TokenId> prefix) const {
  require(!src.empty(), "ToyModel: empty source sentence");
  for (TokenId t : src) {
    require(t < dims_.src_vocab, "ToyModel: source token id " + std::to_string(t) + " out of range");
  }
  for (TokenId t : prefix) {
    require(t < dims_.tgt_vocab, "ToyModel: target token id " + std::to_string(t) + " out of range");
  }
}

std::vector<float> ToyModel::context(std::span<const TokenId> src,
                                     std::span<const TokenId> prefix) const {
  check_tokens(src, prefix);
  const std::size_t e = dims_.emb_dim;
  const std::size_t m = dims_.window;
  std::vector<float> ctx(dims_.context_dim(), 0.0f);
  std::vector<double> mean(e, 0.0);
  for (TokenId s : src) {
    const auto row = params_.src_emb.row(s);
    for (std::size_t c = 0; c < e; ++c) mean[c] += row[c];
  }
  for (std::size_t c = 0; c < e; ++c) {
    ctx[c] = static_cast<float>(mean[c] / static_cast<double>(src.size()));
  }
  const std::size_t hist = prefix.size() + 1;  // BOS + prefix
  for (std::size_t i = 0; i < m; ++i) {
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(hist) - static_cast<std::ptrdiff_t>(m - i);
    TokenId tok = kPad;
    if (pos == 0) tok = kBos;
    else if (pos > 0) tok = prefix[static_cast<std::size_t>(pos - 1)];
    const auto row = params_.tgt_emb.row(tok);
    std::copy(row.begin(), row.end(), ctx.begin() + static_cast<std::ptrdiff_t>((i + 1) * e));
  }
  return ctx;
}

Vector ToyModel::represent(std::span<const TokenId> src, std::span<const TokenId> prefix) const {
  const auto ctx = context(src, prefix);
  Vector repr(dims_.repr_dim);
  for (std::size_t j = 0; j < dims_.repr_dim; ++j) {
    const auto row = params_.w_hidden.row(j);
    double acc = params_.b_hidden[j];
    for (std::size_t c = 0; c < row.size(); ++c) acc += static_cast<double>(row[c]) * ctx[c];
    repr[j] = static_cast<float>(std::tanh(acc));
  }
  return repr;
}

ForwardResult ToyModel::forward(std::span<const TokenId> src,
                                std::span<const TokenId> prefix) const {
  ForwardResult out;
  out.repr = represent(src, prefix);
  std::vector<double> logits(dims_.tgt_vocab);
  for (std::size_t v = 0; v < dims_.tgt_vocab; ++v) {
    const auto row = params_.w_out.row(v);
    double acc = params_.b_out[v];
    for (std::size_t j = 0; j < row.size(); ++j) acc += static_cast<double>(row[j]) * out.repr[j];
    logits[v] = acc;
  }
  out.p_nmt.probs = softmax(logits);
  return out;
}

Vector ToyModel::embed_value(TokenId v) const {
  require(v < dims_.tgt_vocab, "embed_value: token id " + std::to_string(v) + " out of range");
  const auto row = params_.tgt_emb.row(v);
  return Vector(row.begin(), row.end());
}

std::vector<std::uint8_t> ToyModel::serialize() const {
  ByteWriter w;
  w.magic(kModelMagic);
  w.u32(kModelFileVersion);
  w.u32(dims_.src_vocab);
  w.u32(dims_.tgt_vocab);
  w.u32(dims_.emb_dim);
  w.u32(dims_.repr_dim);
  w.u32(dims_.window);
  for (auto block : params_.crefs()) w.f32s(block);
  w.bytes(config_hash_);
  return w.take();
}

ToyModel ToyModel::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kModelMagic);
  const std::uint32_t version = r.u32();
  if (version != kModelFileVersion) {
    throw DataError(DataErrorKind::kVersionMismatch,
                    "model file version " + std::to_string(version) + ", expected " +
                        std::to_string(kModelFileVersion));
  }
  ModelDims dims;
  dims.src_vocab = r.u32();
  dims.tgt_vocab = r.u32();
  dims.emb_dim = r.u32();
  dims.repr_dim = r.u32();
  dims.window = r.u32();
  try {
    dims.validate();
  } catch (const ContractError& e) {
    throw DataError(DataErrorKind::kInconsistentDimensions, e.what());
  }
  ToyParams p = ToyParams::zeros(dims);
  std::size_t floats = 0;
  for (auto block : p.crefs()) floats += block.size();
  const std::size_t expected = floats * sizeof(float) + std::tuple_size_v<Fingerprint>;
  if (r.remaining() < expected) {
    throw DataError(DataErrorKind::kTruncated, "model payload has " + std::to_string(r.remaining()) +
                                                   " bytes, header dims need " + std::to_string(expected));
  }
  if (r.remaining() > expected) {
    throw DataError(DataErrorKind::kInconsistentDimensions,
                    "model payload has " + std::to_string(r.remaining()) +
                        " bytes, header dims need " + std::to_string(expected));
  }
  for (auto block : p.refs()) r.f32s(block);
  Fingerprint config{};
  const auto raw = r.bytes(config.size());
  std::copy(raw.begin(), raw.end(), config.begin());
  for (auto block : p.crefs()) {
    if (!all_finite(block)) throw DataError(DataErrorKind::kCorruption, "non-finite model parameter");
  }
  ToyModel model(dims, std::move(p));
  model.set_config_hash(config);
  return model;
}

void ToyModel::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

ToyModel ToyModel::load(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return deserialize(bytes);
  } catch (const DataError& e) {
    throw DataError(e.kind(), path.string() + ": " + e.detail());
  }
}

Fingerprint ToyModel::fingerprint() const { return sha256(serialize()); }

void TrainConfig::validate() const {
  require(lr > 0.0, "TrainConfig: learning rate must be positive");
  require(batch_sentences >= 1, "TrainConfig: batch size must be positive");
}

void check_compatible(const ToyModel& model, const Corpus& corpus) {
  corpus.validate(model.dims().src_vocab, model.dims().tgt_vocab);
}

ToyModel train_model(const Corpus& corpus, const ModelDims& dims, const TrainConfig& cfg,
                     std::vector<double>* epoch_losses) {
  require(!corpus.empty(), "train: empty corpus");
  ToyModel model = ToyModel::initialize(dims, derive_seed(cfg.seed, "init"));
  return train_loop(std::move(model), corpus, cfg, epoch_losses);
}

ToyModel finetune_model(const ToyModel& model, const Corpus& corpus, const TrainConfig& cfg,
                        std::vector<double>* epoch_losses) {
  require(!corpus.empty(), "finetune: empty corpus");
  check_compatible(model, corpus);
  return train_loop(model, corpus, cfg, epoch_losses);
}

double mean_cross_entropy(const ToyModel& model, const Corpus& corpus) {
  require(!corpus.empty(), "mean_cross_entropy: empty corpus");
  check_compatible(model, corpus);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& pair : corpus.pairs) {
    for (std::size_t t = 0; t < pair.tgt.size(); ++t) {
      const auto out = model.forward(pair.src, std::span(pair.tgt).first(t));
      total -= std::log(std::max(out.p_nmt.probs[pair.tgt[t]], 1e-300));
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

double next_token_accuracy(const ToyModel& model, const Corpus& corpus) {
  require(!corpus.empty(), "next_token_accuracy: empty corpus");
  check_compatible(model, corpus);
  std::size_t correct = 0, n = 0;
  for (const auto& pair : corpus.pairs) {
    for (std::size_t t = 0; t < pair.tgt.size(); ++t) {
      const auto out = model.forward(pair.src, std::span(pair.tgt).first(t));
      correct += out.p_nmt.argmax() == pair.tgt[t] ? 1 : 0;
      ++n;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace revknn
