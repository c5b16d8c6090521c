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

#include "revknn/corpus.h"

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "revknn/error.h"
#include "revknn/io.h"
#include "revknn/random.h"

namespace revknn {
namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kReserved = {"<bos>", "<eos>", "<pad>"};
  return kReserved;
}

// Sparse first-order chain over source ids [kNumReserved, kNumReserved + n).
struct SourceChain {
  std::vector<double> start_weights;            // per source index
  std::vector<std::vector<std::size_t>> next;   // successor indices
  std::vector<std::vector<double>> next_weights;
};

SourceChain make_chain(const GenConfig& cfg, Rng& rng) {
  const std::size_t n = cfg.source_vocab;
  SourceChain chain;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  chain.start_weights.assign(n, 0.0);
  for (std::size_t rank = 0; rank < n; ++rank) {
    chain.start_weights[order[rank]] = 1.0 / static_cast<double>(rank + 1);
  }
  const std::size_t degree = std::min(cfg.successors, n);
  chain.next.resize(n);
  chain.next_weights.resize(n);
  std::vector<std::size_t> pool(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::iota(pool.begin(), pool.end(), 0);
    // partial Fisher-Yates: the first `degree` slots are the successors
    for (std::size_t j = 0; j < degree; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(rng.uniform_index(n - j));
      std::swap(pool[j], pool[pick]);
      chain.next[s].push_back(pool[j]);
      chain.next_weights[s].push_back(1.0 / static_cast<double>(j + 1));
    }
  }
  return chain;
}

Corpus sample_corpus(const GenConfig& cfg, const SourceChain& chain,
                     const std::vector<TokenId>& lexicon, std::size_t sentences,
                     std::string domain, Rng& rng) {
  Corpus corpus;
  corpus.domain = std::move(domain);
  corpus.pairs.reserve(sentences);
  const std::size_t span_len = cfg.max_length - cfg.min_length + 1;
  for (std::size_t n = 0; n < sentences; ++n) {
    const std::size_t len = cfg.min_length + static_cast<std::size_t>(rng.uniform_index(span_len));
    SentencePair pair;
    std::size_t cur = rng.weighted_index(chain.start_weights);
    for (std::size_t i = 0; i < len; ++i) {
      if (i > 0) cur = chain.next[cur][rng.weighted_index(chain.next_weights[cur])];
      const TokenId src = static_cast<TokenId>(kNumReserved + cur);
      pair.src.push_back(src);
      pair.tgt.push_back(lexicon[src]);
    }
    pair.tgt.push_back(kEos);
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

}  // namespace

Vocab Vocab::with_reserved(const std::vector<std::string>& tokens) {
  Vocab v;
  v.tokens_ = reserved_tokens();
  v.tokens_.insert(v.tokens_.end(), tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    const bool inserted = v.ids_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second;
    require(inserted, "Vocab: duplicate token \"" + v.tokens_[i] + "\"");
  }
  return v;
}

const std::string& Vocab::token(TokenId id) const {
  require(id < tokens_.size(), "Vocab: token id out of range");
  return tokens_[id];
}

TokenId Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  require(it != ids_.end(), "Vocab: unknown token \"" + std::string(token) + "\"");
  return it->second;
}

bool Vocab::contains(std::string_view token) const {
  return ids_.count(std::string(token)) > 0;
}

std::size_t Corpus::target_positions() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.tgt.size();
  return n;
}

void Corpus::validate(std::size_t src_vocab, std::size_t tgt_vocab) const {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    require(!p.src.empty() && !p.tgt.empty(),
            "corpus: empty sequence in sentence " + std::to_string(i));
    for (TokenId t : p.src) {
      require(t < src_vocab, "corpus: source id " + std::to_string(t) +
                                 " out of range in sentence " + std::to_string(i));
    }
    for (TokenId t : p.tgt) {
      require(t < tgt_vocab, "corpus: target id " + std::to_string(t) +
                                 " out of range in sentence " + std::to_string(i));
    }
  }
}

void GenConfig::validate() const {
  require(overlap >= 0.0 && overlap <= 1.0, "GenConfig: overlap must lie in [0, 1]");
  require(source_vocab >= 1, "GenConfig: source_vocab must be positive");
  require(lexicon_size >= 1 && lexicon_size <= source_vocab,
          "GenConfig: lexicon_size must lie in [1, source_vocab]");
  require(min_length >= 1 && min_length <= max_length, "GenConfig: bad length range");
  require(successors >= 1, "GenConfig: successors must be positive");
  require(upstream_sentences >= 1 && downstream_train >= 1,
          "GenConfig: training corpora must be non-empty");
}

GeneratedData generate_corpora(const GenConfig& cfg) {
  cfg.validate();
  const std::size_t n_src = cfg.source_vocab;
  const std::size_t n_lex = cfg.lexicon_size;

  GeneratedData out;
  std::vector<std::string> src_tokens, tgt_tokens;
  for (std::size_t i = 0; i < n_src; ++i) src_tokens.push_back("s" + std::to_string(i));
  for (std::size_t i = 0; i < n_lex; ++i) tgt_tokens.push_back("u" + std::to_string(i));
  for (std::size_t i = 0; i < n_lex; ++i) tgt_tokens.push_back("d" + std::to_string(i));
  out.source_vocab = Vocab::with_reserved(src_tokens);
  out.target_vocab = Vocab::with_reserved(tgt_tokens);

  Rng lex_rng(derive_seed(cfg.seed, "lexicon"));
  std::vector<std::size_t> up_slot(n_src), down_slot(n_src), shared_order(n_src);
  std::iota(up_slot.begin(), up_slot.end(), 0);
  std::iota(down_slot.begin(), down_slot.end(), 0);
  std::iota(shared_order.begin(), shared_order.end(), 0);
  lex_rng.shuffle(std::span(up_slot));
  lex_rng.shuffle(std::span(down_slot));
  lex_rng.shuffle(std::span(shared_order));
  const auto n_shared = static_cast<std::size_t>(std::floor(cfg.overlap * static_cast<double>(n_src)));
  std::vector<bool> shared(n_src, false);
  for (std::size_t i = 0; i < n_shared; ++i) shared[shared_order[i]] = true;

  const std::size_t src_size = kNumReserved + n_src;
  out.upstream_lexicon.resize(src_size);
  out.downstream_lexicon.resize(src_size);
  for (TokenId r = 0; r < kNumReserved; ++r) {
    out.upstream_lexicon[r] = r;
    out.downstream_lexicon[r] = r;
  }
  for (std::size_t s = 0; s < n_src; ++s) {
    const auto up = static_cast<TokenId>(kNumReserved + up_slot[s] % n_lex);
    const auto down = static_cast<TokenId>(kNumReserved + n_lex + down_slot[s] % n_lex);
    out.upstream_lexicon[kNumReserved + s] = up;
    out.downstream_lexicon[kNumReserved + s] = shared[s] ? up : down;
  }

  Rng chain_rng(derive_seed(cfg.seed, "source-chain"));
  const SourceChain chain = make_chain(cfg, chain_rng);

  Rng up_rng(derive_seed(cfg.seed, "upstream"));
  Rng train_rng(derive_seed(cfg.seed, "downstream-train"));
  Rng dev_rng(derive_seed(cfg.seed, "downstream-dev"));
  Rng test_rng(derive_seed(cfg.seed, "downstream-test"));
  out.upstream = sample_corpus(cfg, chain, out.upstream_lexicon, cfg.upstream_sentences,
                               "upstream", up_rng);
  out.downstream_train = sample_corpus(cfg, chain, out.downstream_lexicon,
                                       cfg.downstream_train, "downstream.train", train_rng);
  out.downstream_dev = sample_corpus(cfg, chain, out.downstream_lexicon, cfg.downstream_dev,
                                     "downstream.dev", dev_rng);
  out.downstream_test = sample_corpus(cfg, chain, out.downstream_lexicon,
                                      cfg.downstream_test, "downstream.test", test_rng);
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::string text;
  for (const auto& p : corpus.pairs) {
    nlohmann::json line = {{"src", p.src}, {"tgt", p.tgt}};
    text += line.dump();
    text.push_back('\n');
  }
  write_text_file(path, text);
}

Corpus load_corpus(const std::filesystem::path& path, std::string domain) {
  const std::string text = read_text_file(path);
  Corpus corpus;
  corpus.domain = domain.empty() ? path.stem().string() : std::move(domain);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SentencePair p;
      p.src = j.at("src").get<std::vector<TokenId>>();
      p.tgt = j.at("tgt").get<std::vector<TokenId>>();
      if (p.src.empty() || p.tgt.empty()) {
        throw DataError(DataErrorKind::kFormat,
                        path.string() + ":" + std::to_string(line_no) + ": empty sequence");
      }
      corpus.pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(DataErrorKind::kFormat,
                      path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

void save_vocabs(const Vocab& source, const Vocab& target, const std::filesystem::path& path) {
  nlohmann::json j = {{"source", source.tokens()}, {"target", target.tokens()}};
  write_text_file(path, j.dump(2) + "\n");
}

std::pair<Vocab, Vocab> load_vocabs(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    const auto j = nlohmann::json::parse(text);
    auto strip = [&](const char* key) {
      auto tokens = j.at(key).get<std::vector<std::string>>();
      const auto& reserved = reserved_tokens();
      if (tokens.size() < reserved.size() ||
          !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
        throw DataError(DataErrorKind::kFormat,
                        path.string() + ": " + key + " vocab lacks reserved tokens");
      }
      return Vocab::with_reserved({tokens.begin() + static_cast<long>(reserved.size()), tokens.end()});
    };
    return {strip("source"), strip("target")};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

}  // namespace revknn
