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

#include <algorithm>
#include <cstring>
#include <limits>

#include <gtest/gtest.h>

#include "helpers.h"
#include "oracle/oracle.h"
#include "revknn/datastore.h"
#include "revknn/error.h"
#include "revknn/io.h"
#include "revknn/toymodel.h"

namespace revknn {
namespace {

Datastore random_store(Rng& rng, std::size_t n, std::uint32_t dim, float lo = -1.0f,
                       float hi = 1.0f) {
  DatastoreBuilder b(dim, "rand", sha256(std::string_view("m")));
  for (std::size_t i = 0; i < n; ++i) {
    b.append(testing::random_vector(rng, dim, lo, hi), static_cast<TokenId>(rng.uniform_index(50)),
             static_cast<std::uint32_t>(i / 10), static_cast<std::uint32_t>(i % 10));
  }
  return std::move(b).finish();
}

// Keys on a coarse integer grid, so ties in distance are common.
Datastore grid_store(Rng& rng, std::size_t n, std::uint32_t dim) {
  DatastoreBuilder b(dim, "grid", Fingerprint{});
  for (std::size_t i = 0; i < n; ++i) {
    Vector k(dim);
    for (float& x : k) x = static_cast<float>(rng.uniform_index(3));
    b.append(k, 3, static_cast<std::uint32_t>(i), 0);
  }
  return std::move(b).finish();
}

struct Fixture {
  GeneratedData data;
  ToyModel model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.data = generate_corpora(testing::small_gen());
    const ModelDims dims{static_cast<std::uint32_t>(x.data.source_vocab.size()),
                         static_cast<std::uint32_t>(x.data.target_vocab.size()), 4, 8, 3};
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 5;
    x.model = train_model(x.data.upstream, dims, cfg);
    return x;
  }();
  return f;
}

TEST(Build, CountsEveryPositionIncludingEos) {
  const ToyModel m = ToyModel::initialize({10, 12, 4, 6, 3}, 1);
  Corpus c;
  c.pairs.push_back({{3, 4}, {5, 6, 7, kEos}});
  c.pairs.push_back({{5}, {8, 9, 10, 11, kEos}});
  const Datastore ds = build_datastore(m, c);
  EXPECT_EQ(ds.size(), 9u);
  EXPECT_EQ(ds.dim(), 6u);
  EXPECT_EQ(ds.model_fingerprint(), m.fingerprint());
  EXPECT_FALSE(ds.revised());
}

TEST(Build, EntriesFollowTraversalAndMatchForward) {
  const auto& f = fixture();
  const Corpus& c = f.data.downstream_train;
  const Datastore ds = build_datastore(f.model, c);
  ASSERT_EQ(ds.size(), c.target_positions());
  std::size_t i = 0;
  for (std::size_t s = 0; s < c.size(); ++s) {
    const auto& p = c.pairs[s];
    for (std::size_t t = 0; t < p.tgt.size(); ++t, ++i) {
      EXPECT_EQ(ds.sent_id(i), s);
      EXPECT_EQ(ds.timestep(i), t);
      EXPECT_EQ(ds.value(i), p.tgt[t]);
      const std::vector<TokenId> prefix(p.tgt.begin(), p.tgt.begin() + t);
      const Vector repr = f.model.forward(p.src, prefix).repr;
      const auto key = ds.key(i);
      ASSERT_TRUE(std::equal(key.begin(), key.end(), repr.begin(), repr.end())) << i;
    }
  }
}

TEST(Build, RebuildIsByteIdentical) {
  const auto& f = fixture();
  EXPECT_EQ(serialize_datastore(build_datastore(f.model, f.data.downstream_train)),
            serialize_datastore(build_datastore(f.model, f.data.downstream_train)));
}

TEST(Build, VocabMismatchRejected) {
  const ToyModel m = ToyModel::initialize({10, 12, 4, 6, 3}, 1);
  Corpus c;
  c.pairs.push_back({{3}, {20, kEos}});
  EXPECT_THROW(build_datastore(m, c), ContractError);
}

TEST(Builder, RejectsBadAppends) {
  DatastoreBuilder b(2, "d", Fingerprint{});
  b.append(Vector{1, 2}, 3, 0, 0);
  EXPECT_THROW(b.append(Vector{1, 2, 3}, 3, 0, 1), ContractError);
  EXPECT_THROW(b.append(Vector{1, 2}, 3, 0, 0), ContractError);
  EXPECT_THROW(b.append(Vector{1, std::numeric_limits<float>::quiet_NaN()}, 3, 0, 1),
               ContractError);
}

TEST(Search, ExactMatchComesFirst) {
  Rng rng(3);
  const Datastore ds = random_store(rng, 200, 8);
  for (std::size_t i : {0u, 57u, 199u}) {
    const Vector q(ds.key(i).begin(), ds.key(i).end());
    const auto res = search(ds, q, 4);
    ASSERT_EQ(res.size(), 4u);
    EXPECT_EQ(res[0].index, i);
    EXPECT_EQ(res[0].distance, 0.0);
  }
}

TEST(Search, LargeNkReturnsEverythingSorted) {
  Rng rng(4);
  const Datastore ds = random_store(rng, 30, 4);
  const auto res = search(ds, testing::random_vector(rng, 4), 100);
  ASSERT_EQ(res.size(), 30u);
  for (std::size_t i = 1; i < res.size(); ++i) EXPECT_LE(res[i - 1].distance, res[i].distance);
}

TEST(Search, ContractErrors) {
  Rng rng(5);
  const Datastore ds = random_store(rng, 10, 4);
  EXPECT_THROW(search(ds, Vector(3), 1), ContractError);
  EXPECT_THROW(search(ds, Vector(4), 0), ContractError);
}

TEST(SearchProperty, MatchesBruteForceOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(2000);
    const auto dim = static_cast<std::uint32_t>(1 + rng.uniform_index(16));
    const Datastore ds = random_store(rng, n, dim);
    for (int q = 0; q < 5; ++q) {
      const Vector query = testing::random_vector(rng, dim);
      const std::size_t n_k = 1 + rng.uniform_index(20);
      const auto res = search(ds, query, n_k);
      const auto expected = oracle::brute_force_search(ds, query, n_k);
      ASSERT_EQ(res.size(), expected.size());
      for (std::size_t j = 0; j < res.size(); ++j) {
        EXPECT_EQ(res[j].index, expected[j]);
        EXPECT_EQ(res[j].distance, l2_distance(query, ds.key(res[j].index)));
        if (j > 0) {
          EXPECT_LE(res[j - 1].distance, res[j].distance);
        }
      }
    }
  }
}

TEST(SearchProperty, TiesBreakByLowerIndex) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Datastore ds = grid_store(rng, 300, 3);
    Vector query(3);
    for (float& x : query) x = static_cast<float>(rng.uniform_index(3));
    const auto res = search(ds, query, 25);
    EXPECT_EQ(res.size(), 25u);
    std::vector<std::size_t> got;
    for (const auto& nb : res) got.push_back(nb.index);
    EXPECT_EQ(got, oracle::brute_force_search(ds, query, 25));
    for (std::size_t j = 1; j < res.size(); ++j) {
      if (res[j - 1].distance == res[j].distance) {
        EXPECT_LT(res[j - 1].index, res[j].index);
      }
    }
  }
}

TEST(SearchProperty, BatchMatchesSingleQueries) {
  Rng rng(8);
  const Datastore ds = random_store(rng, 500, 6);
  const ExactIndex index(ds);
  std::vector<float> queries;
  for (int q = 0; q < 40; ++q) {
    const auto v = testing::random_vector(rng, 6);
    queries.insert(queries.end(), v.begin(), v.end());
  }
  const auto batch = index.search_batch(queries, 7);
  ASSERT_EQ(batch.size(), 40u);
  for (std::size_t q = 0; q < 40; ++q) {
    EXPECT_EQ(batch[q], index.search(std::span(queries).subspan(q * 6, 6), 7));
  }
}

TEST(DatastoreFile, RoundTripIsExact) {
  Rng rng(9);
  DatastoreBuilder b(5, "koran", sha256(std::string_view("model")));
  for (std::uint32_t i = 0; i < 100; ++i) b.append(testing::random_vector(rng, 5), i % 17, i / 4, i % 4);
  b.mark_revised(sha256(std::string_view("reviser")));
  const Datastore ds = std::move(b).finish();
  const auto dir = testing::temp_dir("ds");
  save_datastore(ds, dir / "a.knnd");
  const Datastore back = load_datastore(dir / "a.knnd");
  EXPECT_EQ(back, ds);
  EXPECT_TRUE(back.revised());
  EXPECT_EQ(back.domain(), "koran");
  EXPECT_EQ(read_file(dir / "a.knnd"), serialize_datastore(ds));
}

DataErrorKind load_error(const std::vector<std::uint8_t>& bytes) {
  try {
    deserialize_datastore(bytes);
  } catch (const DataError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return DataErrorKind::kFormat;
}

TEST(DatastoreFile, DeclaredErrors) {
  Rng rng(10);
  const auto bytes = serialize_datastore(random_store(rng, 20, 16));
  auto bad_magic = bytes;
  bad_magic[1] = 'X';
  EXPECT_EQ(load_error(bad_magic), DataErrorKind::kBadMagic);
  auto bad_version = bytes;
  bad_version[4] = 7;
  EXPECT_EQ(load_error(bad_version), DataErrorKind::kVersionMismatch);
  EXPECT_EQ(load_error({bytes.begin(), bytes.begin() + 10}), DataErrorKind::kTruncated);
  auto wrong_dim = bytes;
  wrong_dim[8] = 32;
  EXPECT_EQ(load_error(wrong_dim), DataErrorKind::kInconsistentDimensions);
  try {
    load_datastore(testing::temp_dir("ds_missing") / "nope.knnd");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataErrorKind::kMissingFile);
    EXPECT_NE(std::string(e.what()).find("nope.knnd"), std::string::npos);
  }
}

TEST(DatastoreFile, InconsistentDimensionsMessage) {
  Rng rng(11);
  auto bytes = serialize_datastore(random_store(rng, 20, 16));
  bytes[8] = 32;
  try {
    deserialize_datastore(bytes);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("inconsistent dimensions"), std::string::npos);
  }
}

}  // namespace
}  // namespace revknn
