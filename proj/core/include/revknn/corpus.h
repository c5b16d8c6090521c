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

#ifndef REVKNN_CORPUS_H_
#define REVKNN_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "revknn/distribution.h"

namespace revknn {

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kPad = 2;
inline constexpr std::size_t kNumReserved = 3;

class Vocab {
 public:
  Vocab() = default;
  // Prepends <bos>, <eos>, <pad>; `tokens` must be distinct and must not
  // reuse the reserved strings.
  static Vocab with_reserved(const std::vector<std::string>& tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct SentencePair {
  std::vector<TokenId> src;
  std::vector<TokenId> tgt;  // ends with kEos

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

struct Corpus {
  std::vector<SentencePair> pairs;
  std::string domain;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  // Total number of target tokens, EOS included.
  std::size_t target_positions() const;
  // Throws ContractError on empty sequences or ids out of range.
  void validate(std::size_t src_vocab, std::size_t tgt_vocab) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Synthetic two-domain translation data. Source sentences come from one
// shared sparse Markov chain; each domain translates token by token through
// its own lexicon. The lexicons agree on floor(overlap * source_vocab) source
// tokens and send every other source token to domain-private target tokens.
struct GenConfig {
  std::size_t source_vocab = 200;    // non-reserved source tokens
  std::size_t lexicon_size = 200;    // distinct target tokens per domain
  double overlap = 0.5;              // rho
  std::size_t upstream_sentences = 2000;
  std::size_t downstream_train = 500;
  std::size_t downstream_dev = 200;
  std::size_t downstream_test = 200;
  std::size_t min_length = 4;
  std::size_t max_length = 10;
  std::size_t successors = 4;        // out-degree of the source Markov chain
  std::uint64_t seed = 1;

  void validate() const;
};

struct GeneratedData {
  Vocab source_vocab;
  Vocab target_vocab;
  // lexicon[d][s] = target id of source id s in domain d (0 upstream,
  // 1 downstream); reserved source ids map to themselves.
  std::vector<TokenId> upstream_lexicon;
  std::vector<TokenId> downstream_lexicon;
  Corpus upstream;
  Corpus downstream_train;
  Corpus downstream_dev;
  Corpus downstream_test;
};

GeneratedData generate_corpora(const GenConfig& cfg);

// JSON-lines, one {"src": [...], "tgt": [...]} object per pair.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path, std::string domain = {});

// {"source": [tokens...], "target": [tokens...]}, reserved tokens included.
void save_vocabs(const Vocab& source, const Vocab& target,
                 const std::filesystem::path& path);
std::pair<Vocab, Vocab> load_vocabs(const std::filesystem::path& path);

}  // namespace revknn

#endif  // REVKNN_CORPUS_H_
