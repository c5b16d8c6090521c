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

#include "revknn/reviser.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "revknn/error.h"
#include "revknn/parallel.h"
#include "revknn/random.h"

namespace revknn {
namespace {

constexpr std::string_view kReviserMagic = "RVSR";

// Intermediate values of one reviser evaluation, all in double.
struct Trace {
  std::vector<double> input;   // [k; k'; emb; emb']
  std::vector<double> pre;     // W1 x + b1
  std::vector<double> hidden;  // relu(pre)
  std::vector<double> delta;   // W2 h + b2
};

void check_shapes(const ReviserParams& p) {
  const std::size_t h = p.w1.rows();
  const std::size_t d = p.w2.rows();
  require(h > 0 && d > 0 && p.b1.size() == h && p.w2.cols() == h && p.b2.size() == d,
          "reviser: inconsistent parameter shapes");
  require(p.w1.cols() > 2 * d && (p.w1.cols() - 2 * d) % 2 == 0,
          "reviser: W1 input width must be 2D + 2E");
}

void run(const ReviserParams& p, std::span<const float> k, std::span<const float> kp,
         std::span<const float> emb, std::span<const float> emb_p, Trace& tr) {
  check_shapes(p);
  const std::size_t d = p.w2.rows();
  const std::size_t e = (p.w1.cols() - 2 * d) / 2;
  require(k.size() == d && kp.size() == d,
          "reviser: key dim " + std::to_string(k.size()) + "/" + std::to_string(kp.size()) +
              " != reviser key dim " + std::to_string(d));
  require(emb.size() == e && emb_p.size() == e,
          "reviser: embedding dim " + std::to_string(emb.size()) + "/" +
              std::to_string(emb_p.size()) + " != reviser embedding dim " + std::to_string(e));
  tr.input.clear();
  tr.input.reserve(p.w1.cols());
  for (auto part : {k, kp, emb, emb_p}) tr.input.insert(tr.input.end(), part.begin(), part.end());

  const std::size_t h = p.w1.rows();
  tr.pre.resize(h);
  tr.hidden.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    const auto row = p.w1.row(j);
    double acc = p.b1[j];
    for (std::size_t c = 0; c < row.size(); ++c) acc += static_cast<double>(row[c]) * tr.input[c];
    tr.pre[j] = acc;
    tr.hidden[j] = acc > 0.0 ? acc : 0.0;
  }
  tr.delta.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto row = p.w2.row(i);
    double acc = p.b2[i];
    for (std::size_t j = 0; j < h; ++j) acc += static_cast<double>(row[j]) * tr.hidden[j];
    tr.delta[i] = acc;
  }
}

void run(const ReviserParams& p, const TrainingRecord& r, Trace& tr) {
  run(p, r.k, r.k_prime, r.emb_v, r.emb_v_prime, tr);
  require(r.avg_q.size() == r.k.size(), "reviser: avg_q dim != key dim");
}

// Loss of one record and dL/d(delta) written to `d_delta`.
double loss_and_delta_grad(const TrainingRecord& r, const Trace& tr, double alpha,
                           DistanceMode mode, std::vector<double>& d_delta) {
  const std::size_t d = tr.delta.size();
  std::vector<double> resid(d);
  double resid_sq = 0.0, delta_sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    resid[i] = static_cast<double>(r.k[i]) + tr.delta[i] - static_cast<double>(r.avg_q[i]);
    resid_sq += resid[i] * resid[i];
    delta_sq += tr.delta[i] * tr.delta[i];
  }
  d_delta.resize(d);
  double semantic;
  if (mode == DistanceMode::kSquared) {
    semantic = resid_sq;
    for (std::size_t i = 0; i < d; ++i) d_delta[i] = 2.0 * resid[i] + 2.0 * alpha * tr.delta[i];
  } else {
    semantic = std::sqrt(resid_sq);
    // subgradient 0 at the kink
    const double inv = semantic > 0.0 ? 1.0 / semantic : 0.0;
    for (std::size_t i = 0; i < d; ++i) d_delta[i] = resid[i] * inv + 2.0 * alpha * tr.delta[i];
  }
  return semantic + alpha * delta_sq;
}

// Double-precision gradient buffers, same layout as ReviserParams.
struct GradBuffers {
  std::vector<double> w1, b1, w2, b2;

  explicit GradBuffers(const ReviserParams& p)
      : w1(p.w1.size()), b1(p.b1.size()), w2(p.w2.size()), b2(p.b2.size()) {}

  void zero() {
    for (auto* v : {&w1, &b1, &w2, &b2}) std::fill(v->begin(), v->end(), 0.0);
  }
};

// Accumulates the summed loss gradient of records[idx...] into `g`; returns
// the summed loss.
double accumulate(const ReviserParams& p, std::span<const TrainingRecord> records,
                  std::span<const std::size_t> idx, double alpha, DistanceMode mode,
                  GradBuffers& g) {
  Trace tr;
  std::vector<double> d_delta, d_hidden;
  const std::size_t h = p.w1.rows();
  const std::size_t in = p.w1.cols();
  const std::size_t d = p.w2.rows();
  double total = 0.0;
  for (std::size_t n : idx) {
    const TrainingRecord& r = records[n];
    run(p, r, tr);
    total += loss_and_delta_grad(r, tr, alpha, mode, d_delta);
    d_hidden.assign(h, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double gi = d_delta[i];
      g.b2[i] += gi;
      const auto row = p.w2.row(i);
      double* g_row = g.w2.data() + i * h;
      for (std::size_t j = 0; j < h; ++j) {
        g_row[j] += gi * tr.hidden[j];
        d_hidden[j] += gi * row[j];
      }
    }
    for (std::size_t j = 0; j < h; ++j) {
      if (tr.pre[j] <= 0.0) continue;  // relu'(x) = 0 for x <= 0
      const double gj = d_hidden[j];
      g.b1[j] += gj;
      double* g_row = g.w1.data() + j * in;
      for (std::size_t c = 0; c < in; ++c) g_row[c] += gj * tr.input[c];
    }
  }
  return total;
}

void to_params(const GradBuffers& g, double scale, ReviserParams& out) {
  auto copy = [scale](const std::vector<double>& src, std::span<float> dst) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i] * scale);
  };
  copy(g.w1, out.w1.flat());
  copy(g.b1, out.b1);
  copy(g.w2, out.w2.flat());
  copy(g.b2, out.b2);
}

}  // namespace

std::uint32_t ReviserDims::resolved_hidden() const {
  return hidden != 0 ? hidden : static_cast<std::uint32_t>(4 * input_dim());
}

ReviserParams ReviserParams::zeros(const ReviserDims& dims) {
  require(dims.key_dim > 0 && dims.emb_dim > 0, "ReviserParams: dims must be positive");
  const std::size_t h = dims.resolved_hidden();
  ReviserParams p;
  p.w1 = Matrix(h, dims.input_dim());
  p.b1 = Vector(h, 0.0f);
  p.w2 = Matrix(dims.key_dim, h);
  p.b2 = Vector(dims.key_dim, 0.0f);
  return p;
}

ReviserParams ReviserParams::random(const ReviserDims& dims, std::uint64_t seed) {
  ReviserParams p = zeros(dims);
  Rng rng(seed);
  const double b1 = 1.0 / std::sqrt(static_cast<double>(dims.input_dim()));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(dims.resolved_hidden()));
  for (float& v : p.w1.flat()) v = static_cast<float>(rng.uniform(-b1, b1));
  for (float& v : p.b1) v = static_cast<float>(rng.uniform(-b1, b1));
  for (float& v : p.w2.flat()) v = static_cast<float>(rng.uniform(-b2, b2));
  for (float& v : p.b2) v = static_cast<float>(rng.uniform(-b2, b2));
  return p;
}

ReviserDims ReviserParams::dims() const {
  check_shapes(*this);
  const auto d = static_cast<std::uint32_t>(w2.rows());
  return {d, static_cast<std::uint32_t>((w1.cols() - 2 * d) / 2),
          static_cast<std::uint32_t>(w1.rows())};
}

ParamRefs ReviserParams::refs() { return {w1.flat(), b1, w2.flat(), b2}; }
GradRefs ReviserParams::crefs() const { return {w1.flat(), b1, w2.flat(), b2}; }

std::string_view to_string(DistanceMode mode) {
  return mode == DistanceMode::kSquared ? "squared" : "euclidean";
}

DistanceMode distance_mode_from_string(std::string_view text) {
  if (text == "squared") return DistanceMode::kSquared;
  if (text == "euclidean") return DistanceMode::kEuclidean;
  throw ContractError("unknown distance mode \"" + std::string(text) +
                      "\" (expected squared or euclidean)");
}

void ReviserTrainConfig::validate() const {
  require(alpha >= 0.0, "ReviserTrainConfig: alpha must be non-negative");
  require(lr > 0.0, "ReviserTrainConfig: learning rate must be positive");
  require(epochs >= 1, "ReviserTrainConfig: epochs must be at least 1");
  require(batch_size >= 1, "ReviserTrainConfig: batch size must be at least 1");
}

Vector reviser_forward(const ReviserParams& params, std::span<const float> k,
                       std::span<const float> k_prime, std::span<const float> emb_v,
                       std::span<const float> emb_v_prime) {
  Trace tr;
  run(params, k, k_prime, emb_v, emb_v_prime, tr);
  return Vector(tr.delta.begin(), tr.delta.end());
}

double reviser_loss(const ReviserParams& params, const TrainingRecord& record, double alpha,
                    DistanceMode mode) {
  require(alpha >= 0.0, "reviser_loss: alpha must be non-negative");
  Trace tr;
  run(params, record, tr);
  std::vector<double> unused;
  return loss_and_delta_grad(record, tr, alpha, mode, unused);
}

ReviserParams reviser_gradients(const ReviserParams& params, std::span<const TrainingRecord> batch,
                                double alpha, DistanceMode mode) {
  require(!batch.empty(), "reviser_gradients: empty batch");
  GradBuffers g(params);
  std::vector<std::size_t> all(batch.size());
  std::iota(all.begin(), all.end(), 0);
  accumulate(params, batch, all, alpha, mode, g);
  ReviserParams out = params;
  to_params(g, 1.0 / static_cast<double>(batch.size()), out);
  return out;
}

ReviserTrainResult train_reviser(std::span<const TrainingRecord> records, const ReviserDims& dims,
                                 const ReviserTrainConfig& cfg) {
  require(!records.empty(), "train_reviser: no training records");
  cfg.validate();
  ReviserTrainResult result;
  result.params = ReviserParams::random(dims, derive_seed(cfg.seed, "init"));
  Rng rng(derive_seed(cfg.seed, "shuffle"));

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  GradBuffers g(result.params);
  ReviserParams grads = result.params;
  AdamState state;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto batch = std::span<const std::size_t>(order).subspan(start, end - start);
      g.zero();
      epoch_loss += accumulate(result.params, records, batch, cfg.alpha, cfg.distance, g);
      to_params(g, 1.0 / static_cast<double>(batch.size()), grads);
      adam_step(result.params.refs(), grads.crefs(), state, cfg.lr);
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(records.size()));
  }
  return result;
}

double mean_delta_norm(const ReviserParams& params, std::span<const TrainingRecord> records) {
  require(!records.empty(), "mean_delta_norm: no records");
  double total = 0.0;
  Trace tr;
  for (const auto& r : records) {
    run(params, r, tr);
    double sq = 0.0;
    for (double v : tr.delta) sq += v * v;
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(records.size());
}

Datastore revise_datastore(const Datastore& upstream, const Datastore& downstream,
                           const ReviserParams& params, const ToyModel& upstream_model,
                           const ToyModel& downstream_model, const Fingerprint& reviser_fp) {
  check_parallel_stores(upstream, downstream);
  const ReviserDims dims = params.dims();
  if (dims.key_dim != upstream.dim() || dims.key_dim != downstream.dim()) {
    throw DataError(DataErrorKind::kInconsistentDimensions,
                    "reviser key dim " + std::to_string(dims.key_dim) + " vs datastore dim " +
                        std::to_string(upstream.dim()) + "/" + std::to_string(downstream.dim()));
  }
  if (dims.emb_dim != upstream_model.dims().emb_dim ||
      dims.emb_dim != downstream_model.dims().emb_dim) {
    throw DataError(DataErrorKind::kInconsistentDimensions,
                    "reviser embedding dim " + std::to_string(dims.emb_dim) +
                        " vs model embedding dim " + std::to_string(upstream_model.dims().emb_dim));
  }
  if (upstream.model_fingerprint() != upstream_model.fingerprint()) {
    warn("revise: upstream datastore was not built by the given upstream model");
  }
  if (downstream.model_fingerprint() != downstream_model.fingerprint()) {
    warn("revise: downstream datastore was not built by the given downstream model");
  }

  const std::size_t d = upstream.dim();
  std::vector<float> keys(upstream.size() * d);
  parallel_for(upstream.size(), [&](std::size_t i) {
    const TokenId v = upstream.value(i);
    const Vector delta = reviser_forward(params, upstream.key(i), downstream.key(i),
                                         upstream_model.embed_value(v),
                                         downstream_model.embed_value(v));
    const auto k = upstream.key(i);
    for (std::size_t c = 0; c < d; ++c) keys[i * d + c] = k[c] + delta[c];
  });

  DatastoreBuilder builder(upstream.dim(), upstream.domain(), upstream.model_fingerprint());
  builder.reserve(upstream.size());
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    builder.append(std::span<const float>(keys).subspan(i * d, d), upstream.value(i),
                   upstream.sent_id(i), upstream.timestep(i));
  }
  builder.mark_revised(reviser_fp);
  return std::move(builder).finish();
}

std::vector<std::uint8_t> serialize_reviser(const ReviserParams& params,
                                            const std::string& config_json) {
  const ReviserDims dims = params.dims();
  ByteWriter w;
  w.magic(kReviserMagic);
  w.u32(kReviserFileVersion);
  w.u32(dims.key_dim);
  w.u32(dims.emb_dim);
  w.u32(dims.hidden);
  for (auto block : params.crefs()) w.f32s(block);
  w.u32(static_cast<std::uint32_t>(config_json.size()));
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(config_json.data()), config_json.size()));
  return w.take();
}

ReviserFile deserialize_reviser(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kReviserMagic);
  const std::uint32_t version = r.u32();
  if (version != kReviserFileVersion) {
    throw DataError(DataErrorKind::kVersionMismatch,
                    "reviser file version " + std::to_string(version) + ", expected " +
                        std::to_string(kReviserFileVersion));
  }
  ReviserDims dims;
  dims.key_dim = r.u32();
  dims.emb_dim = r.u32();
  dims.hidden = r.u32();
  if (dims.key_dim == 0 || dims.emb_dim == 0 || dims.hidden == 0) {
    throw DataError(DataErrorKind::kInconsistentDimensions, "zero reviser dimension");
  }
  ReviserFile out;
  out.params = ReviserParams::zeros(dims);
  std::size_t floats = 0;
  for (auto block : out.params.crefs()) floats += block.size();
  if (r.remaining() < floats * sizeof(float) + sizeof(std::uint32_t)) {
    throw DataError(DataErrorKind::kTruncated, "reviser parameter block shorter than header dims");
  }
  for (auto block : out.params.refs()) r.f32s(block);
  const std::uint32_t json_len = r.u32();
  if (r.remaining() != json_len) {
    throw DataError(r.remaining() < json_len ? DataErrorKind::kTruncated
                                             : DataErrorKind::kInconsistentDimensions,
                    "reviser trailer length " + std::to_string(json_len) + ", " +
                        std::to_string(r.remaining()) + " bytes left");
  }
  const auto raw = r.bytes(json_len);
  out.config_json.assign(raw.begin(), raw.end());
  if (!nlohmann::json::accept(out.config_json)) {
    throw DataError(DataErrorKind::kFormat, "reviser config trailer is not JSON");
  }
  for (auto block : out.params.crefs()) {
    if (!all_finite(block)) throw DataError(DataErrorKind::kCorruption, "non-finite reviser parameter");
  }
  return out;
}

void save_reviser(const ReviserParams& params, const std::string& config_json,
                  const std::filesystem::path& path) {
  write_file(path, serialize_reviser(params, config_json));
}

ReviserFile load_reviser(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return deserialize_reviser(bytes);
  } catch (const DataError& e) {
    throw DataError(e.kind(), path.string() + ": " + e.detail());
  }
}

}  // namespace revknn
