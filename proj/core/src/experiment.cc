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

#include "revknn/experiment.h"

#include <set>
#include <string>

#include "revknn/error.h"
#include "revknn/parallel.h"
#include "revknn/random.h"

namespace revknn {
namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::set<std::string>& known,
                    const std::string& where) {
  require(section.is_object(), "config: section \"" + where + "\" must be an object");
  for (const auto& [key, _] : section.items()) {
    require(known.count(key) > 0, "config: unknown field \"" + where + "." + key + "\"");
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (section.contains(key)) out = section.at(key).get<T>();
}

json train_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"lr", c.lr}, {"batch_sentences", c.batch_sentences}};
}

void read_train(const json& j, const char* name, TrainConfig& c) {
  if (!j.contains(name)) return;
  const auto& s = j.at(name);
  reject_unknown(s, {"epochs", "lr", "batch_sentences"}, name);
  read(s, "epochs", c.epochs);
  read(s, "lr", c.lr);
  read(s, "batch_sentences", c.batch_sentences);
}

}  // namespace

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["data"] = {
      {"source_vocab", data.source_vocab},
      {"lexicon_size", data.lexicon_size},
      {"overlap", data.overlap},
      {"upstream_sentences", data.upstream_sentences},
      {"downstream_train", data.downstream_train},
      {"downstream_dev", data.downstream_dev},
      {"downstream_test", data.downstream_test},
      {"min_length", data.min_length},
      {"max_length", data.max_length},
      {"successors", data.successors},
  };
  j["model"] = {{"emb_dim", emb_dim}, {"repr_dim", repr_dim}, {"window", window}};
  j["upstream_train"] = train_json(upstream_train);
  j["finetune"] = train_json(finetune);
  j["decode"] = {
      {"lambda", decode.lambda},
      {"temperature", decode.temperature},
      {"n_k", decode.n_k},
      {"max_length", decode.max_length},
  };
  j["reviser"] = {
      {"alpha", reviser.alpha},
      {"r_percent", reviser.r_percent},
      {"hidden", reviser.hidden},
      {"epochs", reviser.epochs},
      {"lr", reviser.lr},
      {"batch_size", reviser.batch_size},
      {"distance", std::string(to_string(reviser.distance))},
  };
  j["eval"] = {{"skip_tokens", skip_tokens}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    reject_unknown(j, {"seed", "output_dir", "data", "model", "upstream_train", "finetune",
                       "decode", "reviser", "eval"},
                   "<root>");
    read(j, "seed", c.seed);
    read(j, "output_dir", c.output_dir);
    if (j.contains("data")) {
      const auto& s = j.at("data");
      reject_unknown(s, {"source_vocab", "lexicon_size", "overlap", "upstream_sentences",
                         "downstream_train", "downstream_dev", "downstream_test", "min_length",
                         "max_length", "successors"},
                     "data");
      read(s, "source_vocab", c.data.source_vocab);
      read(s, "lexicon_size", c.data.lexicon_size);
      read(s, "overlap", c.data.overlap);
      read(s, "upstream_sentences", c.data.upstream_sentences);
      read(s, "downstream_train", c.data.downstream_train);
      read(s, "downstream_dev", c.data.downstream_dev);
      read(s, "downstream_test", c.data.downstream_test);
      read(s, "min_length", c.data.min_length);
      read(s, "max_length", c.data.max_length);
      read(s, "successors", c.data.successors);
    }
    if (j.contains("model")) {
      const auto& s = j.at("model");
      reject_unknown(s, {"emb_dim", "repr_dim", "window"}, "model");
      read(s, "emb_dim", c.emb_dim);
      read(s, "repr_dim", c.repr_dim);
      read(s, "window", c.window);
    }
    read_train(j, "upstream_train", c.upstream_train);
    read_train(j, "finetune", c.finetune);
    if (j.contains("decode")) {
      const auto& s = j.at("decode");
      reject_unknown(s, {"lambda", "temperature", "n_k", "max_length"}, "decode");
      read(s, "lambda", c.decode.lambda);
      read(s, "temperature", c.decode.temperature);
      read(s, "n_k", c.decode.n_k);
      read(s, "max_length", c.decode.max_length);
    }
    if (j.contains("reviser")) {
      const auto& s = j.at("reviser");
      reject_unknown(s, {"alpha", "r_percent", "hidden", "epochs", "lr", "batch_size", "distance"},
                     "reviser");
      read(s, "alpha", c.reviser.alpha);
      read(s, "r_percent", c.reviser.r_percent);
      read(s, "hidden", c.reviser.hidden);
      read(s, "epochs", c.reviser.epochs);
      read(s, "lr", c.reviser.lr);
      read(s, "batch_size", c.reviser.batch_size);
      if (s.contains("distance")) {
        c.reviser.distance = distance_mode_from_string(s.at("distance").get<std::string>());
      }
    }
    if (j.contains("eval")) {
      const auto& s = j.at("eval");
      reject_unknown(s, {"skip_tokens"}, "eval");
      read(s, "skip_tokens", c.skip_tokens);
    }
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  data.validate();
  require(emb_dim > 0 && repr_dim > 0 && window > 0, "config: model dims must be positive");
  upstream_train.validate();
  finetune.validate();
  decode.validate();
  require(reviser.r_percent > 0.0 && reviser.r_percent <= 100.0,
          "config: reviser.r_percent must lie in (0, 100]");
  reviser_config().validate();
}

Fingerprint ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");
  return sha256(j.dump());
}

GenConfig ExperimentConfig::gen_config() const {
  GenConfig g = data;
  g.seed = derive_seed(seed, stage::kGenData);
  return g;
}

ModelDims ExperimentConfig::model_dims(std::size_t src_vocab, std::size_t tgt_vocab) const {
  return {static_cast<std::uint32_t>(src_vocab), static_cast<std::uint32_t>(tgt_vocab), emb_dim,
          repr_dim, window};
}

TrainConfig ExperimentConfig::upstream_config() const {
  TrainConfig t = upstream_train;
  t.seed = derive_seed(seed, stage::kTrainModel);
  return t;
}

TrainConfig ExperimentConfig::finetune_config() const {
  TrainConfig t = finetune;
  t.seed = derive_seed(seed, stage::kFinetune);
  return t;
}

ReviserTrainConfig ExperimentConfig::reviser_config() const {
  ReviserTrainConfig r;
  r.alpha = reviser.alpha;
  r.lr = reviser.lr;
  r.epochs = reviser.epochs;
  r.batch_size = reviser.batch_size;
  r.distance = reviser.distance;
  r.seed = derive_seed(seed, stage::kTrainReviser);
  return r;
}

std::string reviser_config_json(const ReviserTrainConfig& cfg, const Fingerprint& config_hash) {
  json j = {
      {"alpha", cfg.alpha},
      {"lr", cfg.lr},
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"seed", cfg.seed},
      {"distance", std::string(to_string(cfg.distance))},
      {"config_hash", to_hex(config_hash)},
  };
  return j.dump();
}

PreparedRun prepare_run(const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedRun run;
  run.data = generate_corpora(cfg.gen_config());
  const auto dims = cfg.model_dims(run.data.source_vocab.size(), run.data.target_vocab.size());
  const Fingerprint config_hash = cfg.hash();
  run.upstream_model = train_model(run.data.upstream, dims, cfg.upstream_config());
  run.upstream_model.set_config_hash(config_hash);
  run.downstream_model = finetune_model(run.upstream_model, run.data.downstream_train,
                                        cfg.finetune_config());
  run.downstream_model.set_config_hash(config_hash);
  run.upstream_ds = build_datastore(run.upstream_model, run.data.downstream_train);
  run.downstream_ds = build_datastore(run.downstream_model, run.data.downstream_train);
  run.stats = collect(run.downstream_model, run.downstream_ds, run.data.downstream_train,
                      cfg.decode.n_k, {.strict_fingerprint = true});
  run.value_freqs = value_frequencies(run.data.downstream_train, run.data.target_vocab.size());
  return run;
}

RevisionRun run_revision(const PreparedRun& prepared, const ExperimentConfig& cfg) {
  RevisionRun rev;
  rev.retained = filter_keys(prepared.stats, prepared.value_freqs, cfg.reviser.r_percent);
  rev.records = build_training_set(rev.retained, prepared.stats, prepared.upstream_model,
                                   prepared.upstream_ds, prepared.downstream_model,
                                   prepared.downstream_ds, prepared.data.downstream_train);
  const ReviserDims dims{cfg.repr_dim, cfg.emb_dim, cfg.reviser.hidden};
  const ReviserTrainConfig rcfg = cfg.reviser_config();
  rev.reviser = train_reviser(rev.records, dims, rcfg);
  rev.reviser_fingerprint =
      sha256(serialize_reviser(rev.reviser.params, reviser_config_json(rcfg, cfg.hash())));
  rev.revised_ds = revise_datastore(prepared.upstream_ds, prepared.downstream_ds,
                                    rev.reviser.params, prepared.upstream_model,
                                    prepared.downstream_model, rev.reviser_fingerprint);
  rev.mean_delta_norm = mean_delta_norm(rev.reviser.params, rev.records);
  return rev;
}

EvalReport eval_retrieval(const ToyModel& model, const Datastore& ds, const Corpus& corpus,
                          const ExperimentConfig& cfg) {
  return retrieval_accuracy(model, ds, corpus, cfg.skip_tokens, cfg.decode.n_k,
                            cfg.decode.temperature);
}

EvalReport eval_translation(const ToyModel& model, const Datastore& ds, const Corpus& corpus,
                            const DecodeConfig& decode) {
  require(!corpus.empty(), "eval_translation: empty corpus");
  const ExactIndex index(ds);
  std::vector<std::vector<TokenId>> hyps(corpus.size()), refs(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t s) {
    const auto& pair = corpus.pairs[s];
    hyps[s] = translate(model, index, ds, pair.src, decode);
    refs[s].assign(pair.tgt.begin(), pair.tgt.end());
    if (!refs[s].empty() && refs[s].back() == kEos) refs[s].pop_back();
  });
  EvalReport report;
  report.token_accuracy = token_accuracy(hyps, refs);
  for (const auto& r : refs) report.evaluated += r.size();
  report.config = {
      {"metric", "token_accuracy"},
      {"lambda", decode.lambda},
      {"temperature", decode.temperature},
      {"n_k", decode.n_k},
      {"max_length", decode.max_length},
      {"datastore_domain", ds.domain()},
      {"datastore_revised", ds.revised()},
      {"corpus", corpus.domain},
  };
  return report;
}

ExperimentResult evaluate_run(const PreparedRun& prepared, const RevisionRun& revision,
                              const ExperimentConfig& cfg) {
  ExperimentResult r;
  const auto& dev = prepared.data.downstream_dev;
  const auto& test = prepared.data.downstream_test;
  r.vanilla = eval_retrieval(prepared.upstream_model, prepared.upstream_ds, dev, cfg);
  r.revised = eval_retrieval(prepared.upstream_model, revision.revised_ds, dev, cfg);
  r.finetuned = eval_retrieval(prepared.downstream_model, prepared.downstream_ds, dev, cfg);
  r.vanilla_translation =
      eval_translation(prepared.upstream_model, prepared.upstream_ds, test, cfg.decode);
  r.revised_translation =
      eval_translation(prepared.upstream_model, revision.revised_ds, test, cfg.decode);
  r.domain_difference = domain_difference(prepared.data.upstream, prepared.data.downstream_train);
  r.mean_delta_norm = revision.mean_delta_norm;
  return r;
}

}  // namespace revknn
