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

#include "revknn/evaluation.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "revknn/error.h"
#include "revknn/inference.h"
#include "revknn/parallel.h"

namespace revknn {

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["retrieval_accuracy"] = retrieval_accuracy ? nlohmann::json(*retrieval_accuracy) : nlohmann::json();
  j["token_accuracy"] = token_accuracy ? nlohmann::json(*token_accuracy) : nlohmann::json();
  j["positions_evaluated"] = evaluated;
  j["positions_skipped"] = skipped;
  j["config"] = config;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    if (!j.at("retrieval_accuracy").is_null()) r.retrieval_accuracy = j.at("retrieval_accuracy").get<double>();
    if (!j.at("token_accuracy").is_null()) r.token_accuracy = j.at("token_accuracy").get<double>();
    r.evaluated = j.at("positions_evaluated").get<std::size_t>();
    r.skipped = j.at("positions_skipped").get<std::size_t>();
    r.config = j.value("config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::kFormat, std::string("eval report: ") + e.what());
  }
  return r;
}

EvalReport retrieval_accuracy(const ToyModel& model, const Datastore& ds, const Corpus& corpus,
                              std::span<const TokenId> skip, std::size_t n_k,
                              double temperature) {
  require(!corpus.empty(), "retrieval_accuracy: empty evaluation corpus");
  require(model.dims().repr_dim == ds.dim(), "retrieval_accuracy: model dim != datastore dim");
  require(!ds.empty(), "retrieval_accuracy: empty datastore");
  require(n_k >= 1 && temperature > 0.0, "retrieval_accuracy: need N_k >= 1 and T > 0");
  check_compatible(model, corpus);
  const std::size_t vocab = model.dims().tgt_vocab;
  std::vector<bool> skipped_token(vocab, false);
  for (TokenId t : skip) {
    if (t < vocab) skipped_token[t] = true;
  }

  const ExactIndex index(ds);
  struct Tally {
    std::size_t correct = 0, evaluated = 0, skipped = 0;
  };
  std::vector<Tally> per_sentence(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t s) {
    const auto& pair = corpus.pairs[s];
    Tally& tally = per_sentence[s];
    for (std::size_t t = 0; t < pair.tgt.size(); ++t) {
      const TokenId gold = pair.tgt[t];
      if (skipped_token[gold]) {
        ++tally.skipped;
        continue;
      }
      const Vector q = model.represent(pair.src, std::span(pair.tgt).first(t));
      const auto neighbors = index.search(q, n_k);
      const auto retrieved = to_retrieved(ds, neighbors);
      if (knn_distribution(retrieved, temperature, vocab).argmax() == gold) ++tally.correct;
      ++tally.evaluated;
    }
  });

  Tally total;
  for (const auto& t : per_sentence) {
    total.correct += t.correct;
    total.evaluated += t.evaluated;
    total.skipped += t.skipped;
  }
  require(total.evaluated > 0, "retrieval_accuracy: no positions evaluated");

  EvalReport report;
  report.retrieval_accuracy =
      static_cast<double>(total.correct) / static_cast<double>(total.evaluated);
  report.evaluated = total.evaluated;
  report.skipped = total.skipped;
  std::vector<TokenId> skip_sorted(skip.begin(), skip.end());
  std::sort(skip_sorted.begin(), skip_sorted.end());
  report.config = {
      {"metric", "retrieval_accuracy"},
      {"n_k", n_k},
      {"temperature", temperature},
      {"skip_tokens", skip_sorted},
      {"datastore_domain", ds.domain()},
      {"datastore_revised", ds.revised()},
      {"corpus", corpus.domain},
  };
  return report;
}

double token_accuracy(const std::vector<std::vector<TokenId>>& hypotheses,
                      const std::vector<std::vector<TokenId>>& references) {
  require(hypotheses.size() == references.size(),
          "token_accuracy: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
              std::to_string(references.size()) + " references");
  std::size_t matches = 0, slots = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& h = hypotheses[i];
    const auto& r = references[i];
    const std::size_t aligned = std::min(h.size(), r.size());
    for (std::size_t t = 0; t < aligned; ++t) matches += h[t] == r[t] ? 1 : 0;
    slots += std::max(h.size(), r.size());
  }
  return slots == 0 ? 1.0 : static_cast<double>(matches) / static_cast<double>(slots);
}

double domain_difference(const Corpus& a, const Corpus& b) {
  require(!a.empty() && !b.empty(), "domain_difference: empty corpus");
  TokenId max_id = 0;
  for (const Corpus* c : {&a, &b}) {
    for (const auto& p : c->pairs) {
      for (TokenId t : p.tgt) max_id = std::max(max_id, t);
    }
  }
  const std::size_t width = static_cast<std::size_t>(max_id) + 1;

  std::vector<double> df(width, 0.0);
  std::vector<std::size_t> last_seen(width, 0);
  std::size_t sentence_no = 0;
  for (const Corpus* c : {&a, &b}) {
    for (const auto& p : c->pairs) {
      ++sentence_no;
      for (TokenId t : p.tgt) {
        if (t < kNumReserved || last_seen[t] == sentence_no) continue;
        last_seen[t] = sentence_no;
        df[t] += 1.0;
      }
    }
  }
  const double n_docs = static_cast<double>(a.size() + b.size());
  std::vector<double> idf(width, 0.0);
  for (std::size_t t = kNumReserved; t < width; ++t) {
    idf[t] = std::log((1.0 + n_docs) / (1.0 + df[t])) + 1.0;
  }

  auto mean_tfidf = [&](const Corpus& c) {
    std::vector<double> v(width, 0.0);
    for (const auto& p : c.pairs) {
      for (TokenId t : p.tgt) {
        if (t >= kNumReserved) v[t] += idf[t];
      }
    }
    for (double& x : v) x /= static_cast<double>(c.size());
    return v;
  };
  const auto va = mean_tfidf(a);
  const auto vb = mean_tfidf(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t t = 0; t < width; ++t) {
    dot += va[t] * vb[t];
    na += va[t] * va[t];
    nb += vb[t] * vb[t];
  }
  require(na > 0.0 && nb > 0.0, "domain_difference: corpus has no non-reserved target tokens");
  const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(1.0 - cosine, 0.0, 1.0);
}

}  // namespace revknn
