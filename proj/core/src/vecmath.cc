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

#include "revknn/vecmath.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "revknn/error.h"

namespace revknn {

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

double squared_l2(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), "squared_l2: dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

double l2_distance(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), "l2_distance: dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
  return std::sqrt(squared_l2(a, b));
}

double squared_norm(std::span<const float> a) {
  double acc = 0.0;
  for (float x : a) acc += static_cast<double>(x) * x;
  return acc;
}

std::vector<double> temperature_softmax(std::span<const double> distances, double temperature) {
  require(!distances.empty(), "temperature_softmax: empty distance list");
  require(temperature > 0.0 && std::isfinite(temperature),
          "temperature_softmax: temperature must be positive");
  // max of -d/T is at the smallest distance
  double min_d = std::numeric_limits<double>::infinity();
  for (double d : distances) {
    require(std::isfinite(d), "temperature_softmax: non-finite distance");
    min_d = std::min(min_d, d);
  }
  std::vector<double> out(distances.size());
  double total = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    out[i] = std::exp(-(distances[i] - min_d) / temperature);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax: empty logits");
  const double max_z = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_z);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

Vector affine(const Matrix& w, std::span<const float> x, std::span<const float> b) {
  require(w.cols() == x.size(), "affine: W.cols != x.dim");
  require(w.rows() == b.size(), "affine: W.rows != b.dim");
  Vector out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    double acc = b[r];
    for (std::size_t c = 0; c < row.size(); ++c) acc += static_cast<double>(row[c]) * x[c];
    out[r] = static_cast<float>(acc);
  }
  return out;
}

std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), "argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

void adam_step(const ParamRefs& params, const GradRefs& grads, AdamState& state, double lr) {
  require(lr > 0.0, "adam_step: learning rate must be positive");
  require(params.size() == grads.size(), "adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].size() == grads[i].size(), "adam_step: gradient shape mismatch");
    require(all_finite(grads[i]), "adam_step: non-finite gradient");
  }
  if (state.step == 0 && state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0f);
      state.second_moment.emplace_back(p.size(), 0.0f);
    }
  }
  require(state.first_moment.size() == params.size() &&
              state.second_moment.size() == params.size(),
          "adam_step: state shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(state.first_moment[i].size() == params[i].size() &&
                state.second_moment[i].size() == params[i].size(),
            "adam_step: state shape mismatch");
  }

  const auto& opt = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = opt.beta1 * m[j] + (1.0 - opt.beta1) * gj;
      const double vj = opt.beta2 * v[j] + (1.0 - opt.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double m_hat = mj / bc1;
      const double v_hat = vj / bc2;
      p[j] = static_cast<float>(p[j] - lr * m_hat / (std::sqrt(v_hat) + opt.epsilon));
    }
  }
}

}  // namespace revknn
