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
#include <numeric>
#include <ranges>
#include <set>

#include <gtest/gtest.h>

#include "helpers.h"
#include "oracle/oracle.h"
#include "revknn/datastore.h"
#include "revknn/error.h"
#include "revknn/io.h"
#include "revknn/pairbuilder.h"
#include "revknn/toymodel.h"

namespace revknn {
namespace {

struct Fixture {
  GeneratedData data;
  ToyModel up;
  ToyModel down;
  Datastore up_ds;
  Datastore down_ds;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.data = generate_corpora(testing::small_gen(3));
    const ModelDims dims{static_cast<std::uint32_t>(x.data.source_vocab.size()),
                         static_cast<std::uint32_t>(x.data.target_vocab.size()), 4, 8, 3};
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.seed = 1;
    x.up = train_model(x.data.upstream, dims, cfg);
    cfg.seed = 2;
    x.down = finetune_model(x.up, x.data.downstream_train, cfg);
    x.up_ds = build_datastore(x.up, x.data.downstream_train);
    x.down_ds = build_datastore(x.down, x.data.downstream_train);
    return x;
  }();
  return f;
}

std::size_t total_count(const StatsTable& stats) {
  std::size_t n = 0;
  for (const auto& [_, st] : stats) n += st.count();
  return n;
}

TEST(Collect, ConservesRetrievals) {
  const auto& f = fixture();
  for (std::size_t n_k : {1u, 3u, 8u}) {
    const auto stats = collect(f.down, f.down_ds, f.data.downstream_train, n_k);
    EXPECT_EQ(total_count(stats), n_k * f.data.downstream_train.target_positions());
    for (const auto& [idx, st] : stats) {
      EXPECT_EQ(st.key_index, idx);
      EXPECT_EQ(st.value, f.down_ds.value(idx));
      EXPECT_GE(st.count(), 1u);
      EXPECT_TRUE(std::is_sorted(st.positions.begin(), st.positions.end()));
      EXPECT_EQ(std::set<Position>(st.positions.begin(), st.positions.end()).size(), st.count());
    }
  }
}

TEST(Collect, SelfRetrievalWithUniqueContexts) {
  const ToyModel m = ToyModel::initialize({12, 16, 4, 8, 3}, 5);
  Corpus c;
  c.pairs.push_back({{3, 4}, {3, 4, 5, kEos}});
  c.pairs.push_back({{5, 6, 7}, {6, 7, 8, 9, kEos}});
  c.pairs.push_back({{8}, {10, kEos}});
  const Datastore ds = build_datastore(m, c);
  const auto stats = collect(m, ds, c, 1);
  ASSERT_EQ(stats.size(), ds.size());
  for (const auto& [idx, st] : stats) {
    ASSERT_EQ(st.positions.size(), 1u);
    EXPECT_EQ(st.positions[0].sent_id, ds.sent_id(idx));
    EXPECT_EQ(st.positions[0].timestep, ds.timestep(idx));
  }
}

TEST(Collect, MatchesBruteForceOnTinyCorpus) {
  const auto& f = fixture();
  Corpus tiny;
  tiny.pairs.assign(f.data.downstream_train.pairs.begin(), f.data.downstream_train.pairs.begin() + 3);
  const Datastore ds = build_datastore(f.down, tiny);
  const auto stats = collect(f.down, ds, tiny, 2);
  const auto expected = oracle::brute_force_collect(f.down, ds, tiny, 2);
  ASSERT_EQ(stats.size(), expected.size());
  for (const auto& [idx, positions] : expected) {
    ASSERT_TRUE(stats.contains(idx));
    EXPECT_EQ(stats.at(idx).positions, positions);
  }
}

TEST(Collect, DeterministicAndFullMatchesOracle) {
  const auto& f = fixture();
  const auto a = collect(f.down, f.down_ds, f.data.downstream_train, 8);
  EXPECT_EQ(a, collect(f.down, f.down_ds, f.data.downstream_train, 8));
  const auto expected = oracle::brute_force_collect(f.down, f.down_ds, f.data.downstream_train, 8);
  ASSERT_EQ(a.size(), expected.size());
  for (const auto& [idx, positions] : expected) EXPECT_EQ(a.at(idx).positions, positions);
}

TEST(Collect, Errors) {
  const auto& f = fixture();
  EXPECT_THROW(collect(f.down, f.down_ds, Corpus{}, 8), ContractError);
  EXPECT_THROW(collect(f.down, f.down_ds, f.data.downstream_train, 0), ContractError);
}

TEST(Collect, FingerprintMismatchWarns) {
  const auto& f = fixture();
  std::vector<std::string> warnings;
  auto old = set_warning_handler([&](std::string_view m) { warnings.emplace_back(m); });
  collect(f.up, f.down_ds, f.data.downstream_train, 2);
  set_warning_handler(old);
  EXPECT_FALSE(warnings.empty());
  EXPECT_THROW(collect(f.up, f.down_ds, f.data.downstream_train, 2, {.strict_fingerprint = true}),
               FingerprintMismatch);
  EXPECT_NO_THROW(
      collect(f.down, f.down_ds, f.data.downstream_train, 2, {.strict_fingerprint = true}));
}

StatsTable make_stats(const std::vector<std::tuple<std::size_t, TokenId, std::size_t>>& rows) {
  StatsTable t;
  for (const auto& [idx, value, count] : rows) {
    KeyQueryStats st;
    st.key_index = idx;
    st.value = value;
    for (std::uint32_t i = 0; i < count; ++i) st.positions.push_back({i, 0});
    t.emplace(idx, st);
  }
  return t;
}

TEST(Filter, HandSortedExample) {
  // scores 3/1, 1/1, 4/2
  const auto stats = make_stats({{1, 5, 3}, {2, 6, 1}, {3, 7, 4}});
  std::vector<std::uint64_t> freqs(10, 1);
  freqs[7] = 2;
  EXPECT_EQ(filter_keys(stats, freqs, 34.0), (std::vector<std::size_t>{1}));
  EXPECT_EQ(filter_keys(stats, freqs, 100.0), (std::vector<std::size_t>{1, 3, 2}));
}

TEST(Filter, TiesGoToLowerIndexAndMinimumOne) {
  const auto stats = make_stats({{9, 5, 2}, {4, 5, 2}, {6, 5, 2}});
  const std::vector<std::uint64_t> freqs(10, 2);
  EXPECT_EQ(filter_keys(stats, freqs, 0.1), (std::vector<std::size_t>{4}));
  EXPECT_EQ(filter_keys(stats, freqs, 50.0), (std::vector<std::size_t>{4, 6}));
}

TEST(Filter, RoundsHalfUp) {
  StatsTable stats;
  for (std::size_t i = 0; i < 10; ++i) {
    auto one = make_stats({{i, 3, 1 + i}});
    stats.merge(one);
  }
  const std::vector<std::uint64_t> freqs(5, 1);
  EXPECT_EQ(filter_keys(stats, freqs, 25.0).size(), 3u);
  EXPECT_EQ(filter_keys(stats, freqs, 24.9).size(), 2u);
  EXPECT_EQ(filter_keys(stats, freqs, 35.0).size(), 4u);
}

TEST(Filter, Errors) {
  const auto stats = make_stats({{0, 3, 1}});
  const std::vector<std::uint64_t> freqs(5, 1);
  EXPECT_THROW(filter_keys(stats, freqs, 0.0), ContractError);
  EXPECT_THROW(filter_keys(stats, freqs, 100.5), ContractError);
  const std::vector<std::uint64_t> zero(5, 0);
  EXPECT_THROW(filter_keys(stats, zero, 50.0), ContractError);
}

StatsTable random_stats(Rng& rng, std::vector<std::uint64_t>& freqs) {
  freqs.assign(8, 0);
  for (auto& f : freqs) f = 1 + rng.uniform_index(5);
  StatsTable t;
  const std::size_t n = 1 + rng.uniform_index(60);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < 0.3) continue;
    auto row = make_stats({{i, static_cast<TokenId>(rng.uniform_index(8)), 1 + rng.uniform_index(6)}});
    t.merge(row);
  }
  if (t.empty()) t = make_stats({{0, 0, 1}});
  return t;
}

TEST(FilterProperty, MatchesBruteForceOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint64_t> freqs;
    const auto stats = random_stats(rng, freqs);
    const double r = 1.0 + rng.uniform_index(100);
    EXPECT_EQ(filter_keys(stats, freqs, r), oracle::brute_force_filter(stats, freqs, r));
  }
}

TEST(FilterProperty, MonotoneInR) {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint64_t> freqs;
    const auto stats = random_stats(rng, freqs);
    std::set<std::size_t> prev;
    for (double r = 5.0; r <= 100.0; r += 5.0) {
      const auto kept = filter_keys(stats, freqs, r);
      const std::set<std::size_t> now(kept.begin(), kept.end());
      EXPECT_TRUE(std::includes(now.begin(), now.end(), prev.begin(), prev.end()));
      for (std::size_t idx : kept) EXPECT_TRUE(stats.contains(idx));
      prev = now;
    }
    EXPECT_EQ(prev.size(), stats.size());
  }
}

TEST(ValueFrequencies, CountsTargetTokens) {
  Corpus c;
  c.pairs.push_back({{3}, {4, 4, 5, kEos}});
  c.pairs.push_back({{3}, {5, kEos}});
  const auto f = value_frequencies(c, 6);
  EXPECT_EQ(f, (std::vector<std::uint64_t>{0, 2, 0, 0, 2, 2}));
}

TEST(BuildTrainingSet, RecordsMatchStoresAndOracleMeans) {
  const auto& f = fixture();
  const auto& corpus = f.data.downstream_train;
  const auto stats = collect(f.down, f.down_ds, corpus, 8);
  const auto freqs = value_frequencies(corpus, f.data.target_vocab.size());
  const auto retained = filter_keys(stats, freqs, 30.0);
  const auto records =
      build_training_set(retained, stats, f.up, f.up_ds, f.down, f.down_ds, corpus);
  ASSERT_EQ(records.size(), retained.size());
  for (std::size_t j = 0; j < records.size(); ++j) {
    const auto& r = records[j];
    const std::size_t i = retained[j];
    EXPECT_EQ(r.key_index, i);
    EXPECT_EQ(r.value, f.up_ds.value(i));
    EXPECT_EQ(r.count, stats.at(i).count());
    EXPECT_TRUE(std::ranges::equal(r.k, f.up_ds.key(i)));
    EXPECT_TRUE(std::ranges::equal(r.k_prime, f.down_ds.key(i)));
    EXPECT_EQ(r.emb_v, f.up.embed_value(r.value));
    EXPECT_EQ(r.emb_v_prime, f.down.embed_value(r.value));
    const auto mean = oracle::brute_force_mean(f.up, corpus, stats.at(i).positions);
    ASSERT_EQ(r.avg_q.size(), mean.size());
    for (std::size_t d = 0; d < mean.size(); ++d) {
      EXPECT_LE(std::abs(r.avg_q[d] - mean[d]), 1e-6 * std::max<long double>(1e-3, std::abs(mean[d])));
    }
  }
}

TEST(BuildTrainingSet, SinglePositionMeanIsBitwiseRepr) {
  const auto& f = fixture();
  const auto& corpus = f.data.downstream_train;
  const auto stats = collect(f.down, f.down_ds, corpus, 1);
  std::vector<std::size_t> singles;
  for (const auto& [idx, st] : stats) {
    if (st.count() == 1) singles.push_back(idx);
  }
  ASSERT_FALSE(singles.empty());
  const auto records = build_training_set(singles, stats, f.up, f.up_ds, f.down, f.down_ds, corpus);
  for (std::size_t j = 0; j < records.size(); ++j) {
    const auto p = stats.at(singles[j]).positions[0];
    const auto& pair = corpus.pairs[p.sent_id];
    const std::vector<TokenId> prefix(pair.tgt.begin(), pair.tgt.begin() + p.timestep);
    EXPECT_EQ(records[j].avg_q, f.up.represent(pair.src, prefix));
  }
}

TEST(BuildTrainingSet, ValueMismatchIsCorruption) {
  const auto& f = fixture();
  const auto& corpus = f.data.downstream_train;
  const auto stats = collect(f.down, f.down_ds, corpus, 2);
  DatastoreBuilder b(f.up_ds.dim(), "bad", f.up.fingerprint());
  for (std::size_t i = 0; i < f.up_ds.size(); ++i) {
    b.append(f.up_ds.key(i), i == 0 ? f.up_ds.value(i) + 1 : f.up_ds.value(i), f.up_ds.sent_id(i),
             f.up_ds.timestep(i));
  }
  const Datastore bad = std::move(b).finish();
  const std::vector<std::size_t> retained{stats.begin()->first};
  try {
    build_training_set(retained, stats, f.up, bad, f.down, f.down_ds, corpus);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataErrorKind::kCorruption);
  }
}

TEST(BuildTrainingSet, UnknownKeyRejected) {
  const auto& f = fixture();
  const auto stats = collect(f.down, f.down_ds, f.data.downstream_train, 2);
  std::size_t missing = 0;
  while (stats.contains(missing)) ++missing;
  const std::vector<std::size_t> retained{missing};
  EXPECT_THROW(build_training_set(retained, stats, f.up, f.up_ds, f.down, f.down_ds,
                                  f.data.downstream_train),
               ContractError);
}

TEST(Stores, ValuesAgreeAcrossModels) {
  const auto& f = fixture();
  EXPECT_EQ(f.up_ds.values(), f.down_ds.values());
  EXPECT_EQ(f.up_ds.sent_ids(), f.down_ds.sent_ids());
  EXPECT_EQ(f.up_ds.timesteps(), f.down_ds.timesteps());
  EXPECT_NO_THROW(check_parallel_stores(f.up_ds, f.down_ds));
}

TEST(RecordFile, RoundTrip) {
  Rng rng(30);
  std::vector<TrainingRecord> records;
  for (std::size_t i = 0; i < 12; ++i) {
    auto r = testing::random_record(rng, 6, 3);
    r.key_index = i * 3;
    r.value = static_cast<TokenId>(i + 3);
    r.count = static_cast<std::uint32_t>(i + 1);
    records.push_back(r);
  }
  RecordFileHeader h;
  h.dim = 6;
  h.emb_dim = 3;
  h.count = records.size();
  h.config_hash = sha256(std::string_view("c"));
  const auto dir = testing::temp_dir("records");
  save_records(records, h, dir / "r.jsonl");
  RecordFileHeader back_h;
  EXPECT_EQ(load_records(dir / "r.jsonl", &back_h), records);
  EXPECT_EQ(back_h.dim, 6u);
  EXPECT_EQ(back_h.count, 12u);
  EXPECT_EQ(back_h.config_hash, h.config_hash);
}

TEST(RecordFile, MalformedRejected) {
  const auto dir = testing::temp_dir("records_bad");
  write_text_file(dir / "r.jsonl", "{\"dim\": 4}\nnot json\n");
  EXPECT_THROW(load_records(dir / "r.jsonl"), DataError);
  EXPECT_THROW(load_records(dir / "missing.jsonl"), DataError);
}

}  // namespace
}  // namespace revknn
