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

#include <cmath>

#include <gtest/gtest.h>

#include "helpers.h"
#include "revknn/datastore.h"
#include "revknn/error.h"
#include "revknn/inference.h"
#include "revknn/toymodel.h"

namespace revknn {
namespace {

Distribution random_distribution(Rng& rng, std::size_t n) {
  Distribution d;
  d.probs.resize(n);
  double total = 0.0;
  for (double& p : d.probs) total += (p = rng.uniform() * (rng.uniform() < 0.3 ? 0.0 : 1.0));
  if (total == 0.0) {
    d.probs[0] = total = 1.0;
  }
  for (double& p : d.probs) p /= total;
  return d;
}

std::vector<Retrieved> random_retrieved(Rng& rng, std::size_t vocab) {
  std::vector<Retrieved> r(1 + rng.uniform_index(16));
  for (auto& x : r) {
    x.value = static_cast<TokenId>(rng.uniform_index(vocab));
    x.distance = rng.uniform(0.0, 50.0);
  }
  return r;
}

TEST(KnnDistribution, SingleResult) {
  const std::vector<Retrieved> r{{7, 3.2}};
  const auto p = knn_distribution(r, 10.0, 10);
  EXPECT_EQ(p.probs[7], 1.0);
  EXPECT_EQ(p.argmax(), 7u);
}

TEST(KnnDistribution, EqualDistancesSplitEvenly) {
  const std::vector<Retrieved> r{{2, 1.5}, {4, 1.5}};
  const auto p = knn_distribution(r, 10.0, 6);
  EXPECT_DOUBLE_EQ(p.probs[2], 0.5);
  EXPECT_DOUBLE_EQ(p.probs[4], 0.5);
}

TEST(KnnDistribution, TwoToOneWeights) {
  const double t = 10.0;
  const std::vector<Retrieved> r{{1, 0.0}, {3, t * std::log(2.0)}};
  const auto p = knn_distribution(r, t, 5);
  EXPECT_NEAR(p.probs[1], 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(p.probs[3], 1.0 / 3.0, 1e-6);
}

TEST(KnnDistribution, SameValueWeightsAreSummed) {
  const std::vector<Retrieved> r{{5, 0.0}, {5, 0.0}, {6, 0.0}};
  const auto p = knn_distribution(r, 1.0, 8);
  EXPECT_NEAR(p.probs[5], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(p.probs[6], 1.0 / 3.0, 1e-12);
}

TEST(KnnDistribution, ContractErrors) {
  EXPECT_THROW(knn_distribution({}, 1.0, 4), ContractError);
  const std::vector<Retrieved> r{{1, 0.0}};
  EXPECT_THROW(knn_distribution(r, 0.0, 4), ContractError);
  EXPECT_THROW(knn_distribution(r, 1.0, 1), ContractError);
}

TEST(KnnDistributionProperty, ValidAndZeroOffRetrieved) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t vocab = 1 + rng.uniform_index(30);
    const auto r = random_retrieved(rng, vocab);
    const auto p = knn_distribution(r, rng.uniform(0.1, 20.0), vocab);
    ASSERT_TRUE(p.is_valid(1e-6));
    std::vector<bool> hit(vocab, false);
    for (const auto& x : r) hit[x.value] = true;
    for (std::size_t v = 0; v < vocab; ++v) {
      if (!hit[v]) {
        EXPECT_EQ(p.probs[v], 0.0);
      }
    }
  }
}

TEST(KnnDistributionProperty, CommonShiftLeavesDistributionUnchanged) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t vocab = 1 + rng.uniform_index(20);
    auto r = random_retrieved(rng, vocab);
    // Dyadic distances and integer shifts keep d - min(d) exact.
    for (auto& x : r) x.distance = static_cast<double>(rng.uniform_index(4096)) / 64.0;
    const double t = std::ldexp(1.0, static_cast<int>(rng.uniform_index(8)) - 2);
    const auto base = knn_distribution(r, t, vocab);
    const double c = static_cast<double>(rng.uniform_index(1000));
    for (auto& x : r) x.distance += c;
    EXPECT_EQ(knn_distribution(r, t, vocab).probs, base.probs);
  }
}

TEST(Interpolate, Endpoints) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(20);
    const auto a = random_distribution(rng, n);
    const auto b = random_distribution(rng, n);
    EXPECT_EQ(interpolate(a, b, 0.0).probs, b.probs);
    EXPECT_EQ(interpolate(a, b, 1.0).probs, a.probs);
  }
}

TEST(Interpolate, Midpoint) {
  const auto p = interpolate(Distribution{{1.0, 0.0}}, Distribution{{0.0, 1.0}}, 0.5);
  EXPECT_EQ(p.probs, (std::vector<double>{0.5, 0.5}));
}

TEST(Interpolate, ContractErrors) {
  const Distribution a{{1.0, 0.0}}, b{{0.0, 0.0, 1.0}};
  EXPECT_THROW(interpolate(a, b, 0.5), ContractError);
  EXPECT_THROW(interpolate(a, a, -0.1), ContractError);
  EXPECT_THROW(interpolate(a, a, 1.5), ContractError);
}

TEST(InterpolateProperty, OutputIsValid) {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(40);
    const auto p = interpolate(random_distribution(rng, n), random_distribution(rng, n),
                               rng.uniform());
    ASSERT_TRUE(p.is_valid(2e-6));
  }
}

struct TranslateFixture {
  GeneratedData data;
  ToyModel model;
  Datastore ds;
};

const TranslateFixture& fixture() {
  static const TranslateFixture f = [] {
    TranslateFixture x;
    x.data = generate_corpora(testing::small_gen(11));
    const ModelDims dims{static_cast<std::uint32_t>(x.data.source_vocab.size()),
                         static_cast<std::uint32_t>(x.data.target_vocab.size()), 4, 8, 3};
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 2;
    x.model = train_model(x.data.upstream, dims, cfg);
    x.ds = build_datastore(x.model, x.data.downstream_train);
    return x;
  }();
  return f;
}

TEST(Translate, LambdaZeroEqualsGreedyDecoding) {
  const auto& f = fixture();
  DecodeConfig cfg;
  cfg.lambda = 0.0;
  cfg.max_length = 12;
  for (const auto& p : f.data.downstream_test.pairs) {
    EXPECT_EQ(translate(f.model, f.ds, p.src, cfg), greedy_decode(f.model, p.src, 12));
  }
}

TEST(Translate, DeterministicAndCapped) {
  const auto& f = fixture();
  DecodeConfig cfg;
  cfg.max_length = 3;
  for (const auto& p : f.data.downstream_test.pairs) {
    const auto out = translate(f.model, f.ds, p.src, cfg);
    EXPECT_LE(out.size(), 3u);
    EXPECT_EQ(out, translate(f.model, f.ds, p.src, cfg));
    for (TokenId t : out) EXPECT_NE(t, kEos);
  }
}

TEST(Translate, NonTerminatingSetupStopsAtCap) {
  const ToyModel m = ToyModel::initialize({8, 8, 4, 6, 2}, 3);
  DatastoreBuilder b(6, "d", m.fingerprint());
  Rng rng(5);
  for (std::uint32_t i = 0; i < 20; ++i) b.append(testing::random_vector(rng, 6), 4, i, 0);
  const Datastore ds = std::move(b).finish();
  DecodeConfig cfg;
  cfg.lambda = 1.0;
  cfg.max_length = 17;
  EXPECT_EQ(translate(m, ds, std::vector<TokenId>{3, 4}, cfg), std::vector<TokenId>(17, 4));
}

TEST(Translate, OverfitPairReproducesGold) {
  Corpus c;
  c.pairs.push_back({{3, 4, 5, 6}, {7, 8, 9, 10, kEos}});
  TrainConfig tc;
  tc.epochs = 300;
  tc.lr = 0.05;
  tc.batch_sentences = 1;
  tc.seed = 1;
  const ToyModel m = train_model(c, {10, 12, 4, 6, 3}, tc);
  const Datastore ds = build_datastore(m, c);
  DecodeConfig cfg;
  cfg.lambda = 0.5;
  EXPECT_EQ(translate(m, ds, c.pairs[0].src, cfg), (std::vector<TokenId>{7, 8, 9, 10}));
}

TEST(Translate, DimMismatchRejected) {
  const ToyModel m = ToyModel::initialize({8, 8, 4, 6, 2}, 3);
  DatastoreBuilder b(5, "d", Fingerprint{});
  b.append(Vector(5, 0.0f), 3, 0, 0);
  const Datastore ds = std::move(b).finish();
  EXPECT_THROW(translate(m, ds, std::vector<TokenId>{3}, DecodeConfig{}), ContractError);
}

TEST(DecodeConfig, Validate) {
  DecodeConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda = 1.1;
  EXPECT_THROW(c.validate(), ContractError);
  c = DecodeConfig{};
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), ContractError);
  c = DecodeConfig{};
  c.n_k = 0;
  EXPECT_THROW(c.validate(), ContractError);
}

}  // namespace
}  // namespace revknn
