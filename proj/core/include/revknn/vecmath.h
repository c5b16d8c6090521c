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

#ifndef REVKNN_VECMATH_H_
#define REVKNN_VECMATH_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace revknn {

// Keys, queries, embeddings and biases are plain float vectors; reductions
// over them accumulate in double.
using Vector = std::vector<float>;

// Dense row-major float matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<float> flat() noexcept { return data_; }
  std::span<const float> flat() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

double l2_distance(std::span<const float> a, std::span<const float> b);
double squared_l2(std::span<const float> a, std::span<const float> b);
double squared_norm(std::span<const float> a);

// p_i proportional to exp(-d_i / temperature), max-shifted.
std::vector<double> temperature_softmax(std::span<const double> distances,
                                        double temperature);

// Plain softmax over logits, max-shifted, double accumulation.
std::vector<double> softmax(std::span<const double> logits);

// Returns W x + b.
Vector affine(const Matrix& w, std::span<const float> x, std::span<const float> b);

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

bool all_finite(std::span<const float> values);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments are allocated lazily on the first step from the parameter shapes
// and must match them on every later step.
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::uint64_t step = 0;
};

using ParamRefs = std::vector<std::span<float>>;
using GradRefs = std::vector<std::span<const float>>;

// One bias-corrected Adam update applied in place to `params`.
void adam_step(const ParamRefs& params, const GradRefs& grads, AdamState& state,
               double lr);

}  // namespace revknn

#endif  // REVKNN_VECMATH_H_
