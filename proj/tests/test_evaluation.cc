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
#include "oracle/oracle.h"
#include "revknn/datastore.h"
#include "revknn/error.h"
#include "revknn/evaluation.h"
#include "revknn/toymodel.h"

namespace revknn {
namespace {

Corpus target_corpus(const std::vector<std::vector<TokenId>>& targets) {
  Corpus c;
  for (const auto& t : targets) c.pairs.push_back({{3}, t});
  return c;
}

TEST(TokenAccuracy, Examples) {
  using Seqs = std::vector<std::vector<TokenId>>;
  EXPECT_EQ(token_accuracy(Seqs{{4, 5, 6}}, Seqs{{4, 5, 6}}), 1.0);
  EXPECT_EQ(token_accuracy(Seqs{{4, 5}}, Seqs{{7, 8}}), 0.0);
  EXPECT_EQ(token_accuracy(Seqs{{4, 5, 6}}, Seqs{{4, 9, 6, 7}}), 0.5);
  EXPECT_DOUBLE_EQ(token_accuracy(Seqs{{4}, {5, 6}}, Seqs{{4, 4}, {5, 6}}), 3.0 / 4.0);
  EXPECT_THROW(token_accuracy(Seqs{{4}}, Seqs{}), ContractError);
}

TEST(DomainDifference, Identity) {
  const auto data = generate_corpora(testing::small_gen());
  EXPECT_NEAR(domain_difference(data.upstream, data.upstream), 0.0, 1e-9);
  EXPECT_NEAR(domain_difference(data.downstream_dev, data.downstream_dev), 0.0, 1e-9);
}

TEST(DomainDifference, DisjointVocabulariesGiveOne) {
  const auto a = target_corpus({{3, 4, kEos}, {4, 4, kEos}});
  const auto b = target_corpus({{5, 6, kEos}, {7, kEos}});
  EXPECT_NEAR(domain_difference(a, b), 1.0, 1e-9);
}

TEST(DomainDifference, HandComputedExample) {
  // A = {[3,3,4], [4,5], [3]}, B = {[4,6], [6,6], [3,6]}; N = 6.
  const auto a = target_corpus({{3, 3, 4, kEos}, {4, 5, kEos}, {3, kEos}});
  const auto b = target_corpus({{4, 6, kEos}, {6, 6, kEos}, {3, 6, kEos}});
  // df: 3 -> 3, 4 -> 3, 5 -> 1, 6 -> 3
  const double i3 = std::log(7.0 / 4.0) + 1.0, i5 = std::log(7.0 / 2.0) + 1.0;
  const double i4 = i3, i6 = i3;
  // mean tf over sentences, times idf
  const double a3 = 3.0 / 3.0 * i3, a4 = 2.0 / 3.0 * i4, a5 = 1.0 / 3.0 * i5;
  const double b3 = 1.0 / 3.0 * i3, b4 = 1.0 / 3.0 * i4, b6 = 4.0 / 3.0 * i6;
  const double dot = a3 * b3 + a4 * b4;
  const double na = std::sqrt(a3 * a3 + a4 * a4 + a5 * a5);
  const double nb = std::sqrt(b3 * b3 + b4 * b4 + b6 * b6);
  EXPECT_NEAR(domain_difference(a, b), 1.0 - dot / (na * nb), 1e-6);
  EXPECT_NEAR(domain_difference(a, b), static_cast<double>(oracle::tfidf_difference(a, b)), 1e-9);
}

TEST(DomainDifferenceProperty, SymmetricBoundedAndMatchesOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<TokenId>> ta, tb;
    const auto draw = [&](std::vector<std::vector<TokenId>>& out) {
      const std::size_t n = 1 + rng.uniform_index(6);
      for (std::size_t s = 0; s < n; ++s) {
        std::vector<TokenId> t(1 + rng.uniform_index(6));
        for (auto& x : t) x = static_cast<TokenId>(3 + rng.uniform_index(10));
        t.push_back(kEos);
        out.push_back(t);
      }
    };
    draw(ta);
    draw(tb);
    const auto a = target_corpus(ta), b = target_corpus(tb);
    const double ab = domain_difference(a, b);
    EXPECT_NEAR(ab, domain_difference(b, a), 1e-9);
    EXPECT_GE(ab, -1e-12);
    EXPECT_LE(ab, 1.0 + 1e-12);
    EXPECT_NEAR(ab, static_cast<double>(oracle::tfidf_difference(a, b)), 1e-9);
  }
}

TEST(DomainDifference, DecreasesWithOverlap) {
  GenConfig g = testing::small_gen();
  g.upstream_sentences = 200;
  g.downstream_train = 100;
  double prev = 2.0;
  for (double rho : {0.0, 0.5, 1.0}) {
    g.overlap = rho;
    const auto data = generate_corpora(g);
    const double d = domain_difference(data.upstream, data.downstream_train);
    EXPECT_LT(d, prev) << "rho " << rho;
    prev = d;
  }
}

TEST(DomainDifference, EmptyRejected) {
  const auto a = target_corpus({{3, kEos}});
  EXPECT_THROW(domain_difference(a, Corpus{}), ContractError);
}

struct Fixture {
  GeneratedData data;
  ToyModel model;
  Datastore ds;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.data = generate_corpora(testing::small_gen(9));
    const ModelDims dims{static_cast<std::uint32_t>(x.data.source_vocab.size()),
                         static_cast<std::uint32_t>(x.data.target_vocab.size()), 4, 8, 3};
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 3;
    x.model = train_model(x.data.upstream, dims, cfg);
    x.ds = build_datastore(x.model, x.data.downstream_train);
    return x;
  }();
  return f;
}

TEST(RetrievalAccuracy, SelfRetrievalIsPerfect) {
  const ToyModel m = ToyModel::initialize({12, 16, 4, 8, 3}, 5);
  Corpus c;
  c.pairs.push_back({{3, 4}, {3, 4, 5, kEos}});
  c.pairs.push_back({{5, 6, 7}, {6, 7, 8, 9, kEos}});
  c.pairs.push_back({{8}, {10, kEos}});
  const Datastore ds = build_datastore(m, c);
  const auto rep = retrieval_accuracy(m, ds, c, {}, 1, 10.0);
  EXPECT_EQ(rep.retrieval_accuracy.value(), 1.0);
  EXPECT_EQ(rep.evaluated, ds.size());
  EXPECT_EQ(rep.skipped, 0u);
}

TEST(RetrievalAccuracy, BoundedAndCountsAddUp) {
  const auto& f = fixture();
  const std::vector<TokenId> skip{kEos, 5};
  const auto rep = retrieval_accuracy(f.model, f.ds, f.data.downstream_dev, skip, 8, 10.0);
  ASSERT_TRUE(rep.retrieval_accuracy.has_value());
  EXPECT_GE(*rep.retrieval_accuracy, 0.0);
  EXPECT_LE(*rep.retrieval_accuracy, 1.0);
  EXPECT_EQ(rep.evaluated + rep.skipped, f.data.downstream_dev.target_positions());
  EXPECT_GE(rep.skipped, f.data.downstream_dev.size());
}

TEST(RetrievalAccuracy, DeterministicAndOrderInvariant) {
  const auto& f = fixture();
  const auto base = retrieval_accuracy(f.model, f.ds, f.data.downstream_dev, {}, 8, 10.0);
  EXPECT_EQ(retrieval_accuracy(f.model, f.ds, f.data.downstream_dev, {}, 8, 10.0).retrieval_accuracy,
            base.retrieval_accuracy);
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    Corpus shuffled = f.data.downstream_dev;
    rng.shuffle(std::span(shuffled.pairs));
    const auto rep = retrieval_accuracy(f.model, f.ds, shuffled, {}, 8, 10.0);
    EXPECT_EQ(rep.retrieval_accuracy, base.retrieval_accuracy);
    EXPECT_EQ(rep.evaluated, base.evaluated);
  }
}

TEST(RetrievalAccuracy, Errors) {
  const auto& f = fixture();
  EXPECT_THROW(retrieval_accuracy(f.model, f.ds, Corpus{}, {}, 8, 10.0), ContractError);
  std::vector<TokenId> all(f.data.target_vocab.size());
  for (TokenId t = 0; t < all.size(); ++t) all[t] = t;
  try {
    retrieval_accuracy(f.model, f.ds, f.data.downstream_dev, all, 8, 10.0);
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("no positions evaluated"), std::string::npos);
  }
}

TEST(EvalReport, JsonRoundTrip) {
  EvalReport r;
  r.retrieval_accuracy = 0.25;
  r.evaluated = 40;
  r.skipped = 2;
  r.config = {{"n_k", 8}};
  const auto back = EvalReport::from_json(r.to_json());
  EXPECT_EQ(back.retrieval_accuracy, r.retrieval_accuracy);
  EXPECT_FALSE(back.token_accuracy.has_value());
  EXPECT_EQ(back.evaluated, 40u);
  EXPECT_EQ(back.skipped, 2u);
  EXPECT_EQ(back.config, r.config);
}

}  // namespace
}  // namespace revknn
