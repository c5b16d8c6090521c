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

#include <benchmark/benchmark.h>

#include "revknn/datastore.h"
#include "revknn/random.h"
#include "revknn/reviser.h"
#include "revknn/toymodel.h"

namespace revknn {
namespace {

Vector random_vector(Rng& rng, std::size_t n) {
  Vector v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

Datastore random_store(std::size_t n, std::uint32_t dim) {
  Rng rng(1);
  DatastoreBuilder b(dim, "bench", Fingerprint{});
  for (std::size_t i = 0; i < n; ++i) {
    b.append(random_vector(rng, dim), static_cast<TokenId>(i % 200), static_cast<std::uint32_t>(i), 0);
  }
  return std::move(b).finish();
}

void BM_ExactSearch(benchmark::State& state) {
  const Datastore ds = random_store(static_cast<std::size_t>(state.range(0)), 32);
  Rng rng(2);
  const Vector q = random_vector(rng, 32);
  for (auto _ : state) benchmark::DoNotOptimize(search(ds, q, 8));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExactSearch)->Arg(1000)->Arg(4000)->Arg(16000);

void BM_ReviserGradients(benchmark::State& state) {
  const ReviserDims dims{32, 16, 0};
  const auto params = ReviserParams::random(dims, 3);
  Rng rng(4);
  std::vector<TrainingRecord> batch(static_cast<std::size_t>(state.range(0)));
  for (auto& r : batch) {
    r.k = random_vector(rng, 32);
    r.k_prime = random_vector(rng, 32);
    r.emb_v = random_vector(rng, 16);
    r.emb_v_prime = random_vector(rng, 16);
    r.avg_q = random_vector(rng, 32);
    r.count = 1;
  }
  for (auto _ : state) benchmark::DoNotOptimize(reviser_gradients(params, batch, 0.4));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ReviserGradients)->Arg(1)->Arg(32);

void BM_ToyForward(benchmark::State& state) {
  const ToyModel model = ToyModel::initialize({203, 403, 16, 32, 3}, 5);
  const std::vector<TokenId> src{3, 17, 42, 8, 99, 150};
  const std::vector<TokenId> prefix{210, 5, 300};
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(src, prefix));
}
BENCHMARK(BM_ToyForward);

}  // namespace
}  // namespace revknn

BENCHMARK_MAIN();
