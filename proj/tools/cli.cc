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

#include "cli.h"

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "revknn/corpus.h"
#include "revknn/datastore.h"
#include "revknn/error.h"
#include "revknn/evaluation.h"
#include "revknn/experiment.h"
#include "revknn/inference.h"
#include "revknn/io.h"
#include "revknn/pairbuilder.h"
#include "revknn/reviser.h"
#include "revknn/toymodel.h"

namespace revknn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Flag errors found after parsing (bad values, conflicting options).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> source_vocab, lexicon_size, upstream_sentences, downstream_train,
      downstream_dev, downstream_test, min_length, max_length, successors;
  std::optional<double> overlap;
  std::optional<std::uint32_t> emb_dim, repr_dim, window;
  std::optional<std::size_t> epochs, batch_sentences;
  std::optional<double> lr;
  std::optional<double> lambda, temperature;
  std::optional<std::size_t> n_k, max_output;
  std::optional<double> alpha, r_percent, reviser_lr;
  std::optional<std::uint32_t> hidden;
  std::optional<std::size_t> reviser_epochs, batch_size;
  std::optional<std::string> distance;
  std::vector<TokenId> skip;
};

struct Common {
  std::string config_path;
  Overrides ov;
};

void add_config(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "Experiment config JSON")->check(CLI::ExistingFile);
  app->add_option("--seed", c.ov.seed, "Root seed");
}

void add_data_flags(CLI::App* app, Overrides& ov) {
  app->add_option("--source-vocab", ov.source_vocab);
  app->add_option("--lexicon-size", ov.lexicon_size);
  app->add_option("--overlap", ov.overlap, "Lexicon overlap ratio");
  app->add_option("--upstream-sentences", ov.upstream_sentences);
  app->add_option("--downstream-train", ov.downstream_train);
  app->add_option("--downstream-dev", ov.downstream_dev);
  app->add_option("--downstream-test", ov.downstream_test);
  app->add_option("--min-length", ov.min_length);
  app->add_option("--max-length", ov.max_length);
  app->add_option("--successors", ov.successors);
}

void add_model_flags(CLI::App* app, Overrides& ov) {
  app->add_option("--emb-dim", ov.emb_dim);
  app->add_option("--repr-dim", ov.repr_dim);
  app->add_option("--window", ov.window);
}

void add_train_flags(CLI::App* app, Overrides& ov) {
  app->add_option("--epochs", ov.epochs);
  app->add_option("--lr", ov.lr);
  app->add_option("--batch-sentences", ov.batch_sentences);
}

void add_retrieval_flags(CLI::App* app, Overrides& ov) {
  app->add_option("--n-k", ov.n_k, "Neighbours per query");
  app->add_option("--temperature", ov.temperature);
}

void add_decode_flags(CLI::App* app, Overrides& ov) {
  add_retrieval_flags(app, ov);
  app->add_option("--lambda", ov.lambda);
  app->add_option("--max-output", ov.max_output, "Maximum hypothesis length");
}

void add_reviser_flags(CLI::App* app, Overrides& ov) {
  app->add_option("--alpha", ov.alpha);
  app->add_option("--hidden", ov.hidden);
  app->add_option("--reviser-epochs", ov.reviser_epochs);
  app->add_option("--reviser-lr", ov.reviser_lr);
  app->add_option("--batch-size", ov.batch_size);
  app->add_option("--distance", ov.distance)->check(CLI::IsMember({"squared", "euclidean"}));
}

template <typename T, typename U>
void apply(const std::optional<T>& o, U& field) {
  if (o) field = *o;
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg;
  try {
    if (!c.config_path.empty()) {
      std::ifstream in(c.config_path);
      cfg = ExperimentConfig::from_json(json::parse(in));
    }
    const auto& ov = c.ov;
    apply(ov.seed, cfg.seed);
    apply(ov.source_vocab, cfg.data.source_vocab);
    apply(ov.lexicon_size, cfg.data.lexicon_size);
    apply(ov.overlap, cfg.data.overlap);
    apply(ov.upstream_sentences, cfg.data.upstream_sentences);
    apply(ov.downstream_train, cfg.data.downstream_train);
    apply(ov.downstream_dev, cfg.data.downstream_dev);
    apply(ov.downstream_test, cfg.data.downstream_test);
    apply(ov.min_length, cfg.data.min_length);
    apply(ov.max_length, cfg.data.max_length);
    apply(ov.successors, cfg.data.successors);
    apply(ov.emb_dim, cfg.emb_dim);
    apply(ov.repr_dim, cfg.repr_dim);
    apply(ov.window, cfg.window);
    apply(ov.lambda, cfg.decode.lambda);
    apply(ov.temperature, cfg.decode.temperature);
    apply(ov.n_k, cfg.decode.n_k);
    apply(ov.max_output, cfg.decode.max_length);
    apply(ov.alpha, cfg.reviser.alpha);
    apply(ov.r_percent, cfg.reviser.r_percent);
    apply(ov.hidden, cfg.reviser.hidden);
    apply(ov.reviser_epochs, cfg.reviser.epochs);
    apply(ov.reviser_lr, cfg.reviser.lr);
    apply(ov.batch_size, cfg.reviser.batch_size);
    if (ov.distance) cfg.reviser.distance = distance_mode_from_string(*ov.distance);
    if (!ov.skip.empty()) cfg.skip_tokens = ov.skip;
    cfg.validate();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

// --epochs/--lr/--batch-sentences target the stage being run.
ExperimentConfig resolve_train(const Common& c, bool finetune) {
  ExperimentConfig cfg = resolve(c);
  TrainConfig& t = finetune ? cfg.finetune : cfg.upstream_train;
  apply(c.ov.epochs, t.epochs);
  apply(c.ov.lr, t.lr);
  apply(c.ov.batch_sentences, t.batch_sentences);
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void check_link(const std::string& what, const Fingerprint& expected, const Fingerprint& actual) {
  if (expected != actual) {
    warn(what + ": fingerprint mismatch (expected " + to_hex(expected).substr(0, 12) + ", got " +
         to_hex(actual).substr(0, 12) + ")");
  }
}

void check_config_hash(const std::string& artifact, const Fingerprint& recorded,
                       const ExperimentConfig& cfg) {
  check_link(artifact + " config hash", cfg.hash(), recorded);
}

void check_model_store(const std::string& name, const ToyModel& model, const Datastore& ds) {
  check_link(name + " datastore was built by a different model", model.fingerprint(),
             ds.model_fingerprint());
}

Corpus read_corpus(const std::string& path) { return load_corpus(path); }

std::size_t vocab_size_of(const ToyModel& model) { return model.dims().tgt_vocab; }

void write_json(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
}

std::string format_accuracy(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string read_run_file(const fs::path& dir, const std::string& name) {
  return read_text_file(dir / name);
}

json parse_run_json(const fs::path& dir, const std::string& name) {
  const std::string text = read_run_file(dir, name);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(DataErrorKind::kFormat, (dir / name).string() + ": " + e.what());
  }
}

// --- subcommands -----------------------------------------------------------

int cmd_gen_data(const Common& c, const std::string& out_dir) {
  const ExperimentConfig cfg = resolve(c);
  const GeneratedData data = generate_corpora(cfg.gen_config());
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  save_vocabs(data.source_vocab, data.target_vocab, dir / "vocab.json");
  save_corpus(data.upstream, dir / "upstream.jsonl");
  save_corpus(data.downstream_train, dir / "downstream.train.jsonl");
  save_corpus(data.downstream_dev, dir / "downstream.dev.jsonl");
  save_corpus(data.downstream_test, dir / "downstream.test.jsonl");
  json manifest = {{"config_hash", to_hex(cfg.hash())}, {"config", cfg.to_json()}};
  manifest["config"].erase("output_dir");
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

void check_corpus_manifest(const std::string& corpus_path, const ExperimentConfig& cfg) {
  const fs::path manifest = fs::path(corpus_path).parent_path() / "manifest.json";
  if (!fs::exists(manifest)) return;
  const json m = parse_run_json(manifest.parent_path(), "manifest.json");
  if (m.contains("config_hash") && m.at("config_hash").is_string()) {
    check_config_hash("corpus", fingerprint_from_hex(m.at("config_hash").get<std::string>()), cfg);
  }
}

int cmd_train_model(const Common& c, const std::string& corpus_path, const std::string& vocab_path,
                    const std::string& out) {
  const ExperimentConfig cfg = resolve_train(c, false);
  const auto [src, tgt] = load_vocabs(vocab_path);
  const Corpus corpus = read_corpus(corpus_path);
  check_corpus_manifest(corpus_path, cfg);
  ToyModel model = train_model(corpus, cfg.model_dims(src.size(), tgt.size()), cfg.upstream_config());
  model.set_config_hash(cfg.hash());
  model.save(out);
  return kExitOk;
}

int cmd_finetune(const Common& c, const std::string& model_path, const std::string& corpus_path,
                 const std::string& out) {
  const ExperimentConfig cfg = resolve_train(c, true);
  const ToyModel up = ToyModel::load(model_path);
  const Corpus corpus = read_corpus(corpus_path);
  check_config_hash("upstream model", up.config_hash(), cfg);
  check_corpus_manifest(corpus_path, cfg);
  ToyModel down = finetune_model(up, corpus, cfg.finetune_config());
  down.set_config_hash(cfg.hash());
  down.save(out);
  return kExitOk;
}

int cmd_build_datastore(const std::string& model_path, const std::string& corpus_path,
                        const std::string& out) {
  const ToyModel model = ToyModel::load(model_path);
  const Corpus corpus = read_corpus(corpus_path);
  save_datastore(build_datastore(model, corpus), out);
  return kExitOk;
}

struct PairPaths {
  std::string up_model, down_model, up_ds, down_ds, corpus, out;
};

int cmd_collect_pairs(const Common& c, const PairPaths& p) {
  const ExperimentConfig cfg = resolve(c);
  const ToyModel up = ToyModel::load(p.up_model);
  const ToyModel down = ToyModel::load(p.down_model);
  const Datastore up_ds = load_datastore(p.up_ds);
  const Datastore down_ds = load_datastore(p.down_ds);
  const Corpus corpus = read_corpus(p.corpus);
  check_model_store("upstream", up, up_ds);
  check_model_store("downstream", down, down_ds);
  check_config_hash("downstream model", down.config_hash(), cfg);

  const StatsTable stats = collect(down, down_ds, corpus, cfg.decode.n_k);
  const auto freqs = value_frequencies(corpus, vocab_size_of(down));
  const auto retained = filter_keys(stats, freqs, cfg.reviser.r_percent);
  const auto records = build_training_set(retained, stats, up, up_ds, down, down_ds, corpus);
  RecordFileHeader header;
  header.dim = up_ds.dim();
  header.emb_dim = up.dims().emb_dim;
  header.count = records.size();
  header.upstream_model = up.fingerprint();
  header.downstream_model = down.fingerprint();
  header.config_hash = cfg.hash();
  save_records(records, header, p.out);
  return kExitOk;
}

int cmd_train_reviser(const Common& c, const std::string& records_path, const std::string& out) {
  const ExperimentConfig cfg = resolve(c);
  RecordFileHeader header;
  const auto records = load_records(records_path, &header);
  check_config_hash("training records", header.config_hash, cfg);
  const ReviserDims dims{header.dim, header.emb_dim, cfg.reviser.hidden};
  const ReviserTrainConfig rcfg = cfg.reviser_config();
  const ReviserTrainResult result = train_reviser(records, dims, rcfg);
  save_reviser(result.params, reviser_config_json(rcfg, cfg.hash()), out);
  return kExitOk;
}

struct RevisePaths {
  std::string up_ds, down_ds, reviser, up_model, down_model, out;
};

int cmd_revise(const RevisePaths& p) {
  const Datastore up_ds = load_datastore(p.up_ds);
  const Datastore down_ds = load_datastore(p.down_ds);
  const ReviserFile reviser = load_reviser(p.reviser);
  const ToyModel up = ToyModel::load(p.up_model);
  const ToyModel down = ToyModel::load(p.down_model);
  check_model_store("upstream", up, up_ds);
  check_model_store("downstream", down, down_ds);
  try {
    const json echo = json::parse(reviser.config_json);
    if (echo.contains("config_hash") && echo.at("config_hash").is_string()) {
      check_link("reviser config hash", up.config_hash(),
                 fingerprint_from_hex(echo.at("config_hash").get<std::string>()));
    }
  } catch (const json::exception&) {
    warn("reviser config echo is not valid JSON");
  }
  const Fingerprint reviser_fp = sha256(read_file(p.reviser));
  save_datastore(revise_datastore(up_ds, down_ds, reviser.params, up, down, reviser_fp), p.out);
  return kExitOk;
}

int cmd_translate(const Common& c, const std::string& model_path, const std::string& ds_path,
                  const std::string& corpus_path, const std::string& out) {
  const ExperimentConfig cfg = resolve(c);
  const ToyModel model = ToyModel::load(model_path);
  const Datastore ds = load_datastore(ds_path);
  const Corpus corpus = read_corpus(corpus_path);
  check_model_store("translation", model, ds);
  const ExactIndex index(ds);
  std::ostringstream lines;
  for (const auto& pair : corpus.pairs) {
    const json line = {{"hyp", translate(model, index, ds, pair.src, cfg.decode)}};
    lines << line.dump() << "\n";
  }
  if (out.empty()) {
    std::cout << lines.str();
  } else {
    write_text_file(out, lines.str());
  }
  return kExitOk;
}

int cmd_eval_retrieval(const Common& c, const std::string& model_path, const std::string& ds_path,
                       const std::string& corpus_path, const std::string& out) {
  const ExperimentConfig cfg = resolve(c);
  const ToyModel model = ToyModel::load(model_path);
  const Datastore ds = load_datastore(ds_path);
  const Corpus corpus = read_corpus(corpus_path);
  check_model_store("evaluation", model, ds);
  write_json(eval_retrieval(model, ds, corpus, cfg).to_json(), out);
  return kExitOk;
}

int cmd_eval_translate(const Common& c, const std::string& model_path, const std::string& ds_path,
                       const std::string& corpus_path, const std::string& out) {
  const ExperimentConfig cfg = resolve(c);
  const ToyModel model = ToyModel::load(model_path);
  const Datastore ds = load_datastore(ds_path);
  const Corpus corpus = read_corpus(corpus_path);
  check_model_store("evaluation", model, ds);
  write_json(eval_translation(model, ds, corpus, cfg.decode).to_json(), out);
  return kExitOk;
}

int cmd_domain_diff(const std::string& a, const std::string& b, const std::string& out) {
  const Corpus ca = read_corpus(a);
  const Corpus cb = read_corpus(b);
  write_json({{"corpus_a", ca.domain}, {"corpus_b", cb.domain},
              {"domain_difference", domain_difference(ca, cb)}},
             out);
  return kExitOk;
}

void write_report(const fs::path& dir) {
  const ExperimentReport report = report_experiment(dir);
  write_text_file(dir / "report.json", report.json.dump(2) + "\n");
  write_text_file(dir / "report.txt", report.text);
}

int cmd_run_experiment(const Common& c, const std::string& out_override, bool quiet) {
  ExperimentConfig cfg = resolve(c);
  if (!out_override.empty()) cfg.output_dir = out_override;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir / "data");
  fs::create_directories(dir / "eval");
  write_text_file(dir / "config.json", cfg.to_json().dump(2) + "\n");

  const PreparedRun prepared = prepare_run(cfg);
  const auto& data = prepared.data;
  save_vocabs(data.source_vocab, data.target_vocab, dir / "data" / "vocab.json");
  save_corpus(data.upstream, dir / "data" / "upstream.jsonl");
  save_corpus(data.downstream_train, dir / "data" / "downstream.train.jsonl");
  save_corpus(data.downstream_dev, dir / "data" / "downstream.dev.jsonl");
  save_corpus(data.downstream_test, dir / "data" / "downstream.test.jsonl");
  prepared.upstream_model.save(dir / "upstream.model");
  prepared.downstream_model.save(dir / "downstream.model");
  save_datastore(prepared.upstream_ds, dir / "upstream.knnd");
  save_datastore(prepared.downstream_ds, dir / "downstream.knnd");

  const RevisionRun revision = run_revision(prepared, cfg);
  RecordFileHeader header;
  header.dim = cfg.repr_dim;
  header.emb_dim = cfg.emb_dim;
  header.count = revision.records.size();
  header.upstream_model = prepared.upstream_model.fingerprint();
  header.downstream_model = prepared.downstream_model.fingerprint();
  header.config_hash = cfg.hash();
  save_records(revision.records, header, dir / "records.jsonl");
  save_reviser(revision.reviser.params, reviser_config_json(cfg.reviser_config(), cfg.hash()),
               dir / "reviser.bin");
  save_datastore(revision.revised_ds, dir / "revised.knnd");

  const ExperimentResult result = evaluate_run(prepared, revision, cfg);
  const auto put = [&](const char* name, const EvalReport& r) {
    write_text_file(dir / "eval" / name, r.to_json().dump(2) + "\n");
  };
  put("retrieval.vanilla.json", result.vanilla);
  put("retrieval.revised.json", result.revised);
  put("retrieval.finetuned.json", result.finetuned);
  put("translation.vanilla.json", result.vanilla_translation);
  put("translation.revised.json", result.revised_translation);
  const json summary = {
      {"config_hash", to_hex(cfg.hash())},
      {"domain_difference", result.domain_difference},
      {"mean_delta_norm", result.mean_delta_norm},
      {"training_records", revision.records.size()},
      {"reviser_fingerprint", to_hex(revision.reviser_fingerprint)},
  };
  write_text_file(dir / "eval" / "summary.json", summary.dump(2) + "\n");
  write_report(dir);
  if (!quiet) std::cout << read_text_file(dir / "report.txt");
  return kExitOk;
}

int cmd_report(const std::string& dir, bool as_json) {
  const ExperimentReport report = report_experiment(dir);
  std::cout << (as_json ? report.json.dump(2) + "\n" : report.text);
  return kExitOk;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const FingerprintMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace

ExperimentReport report_experiment(const fs::path& run_dir) {
  const auto eval = run_dir / "eval";
  const auto load = [&](const char* name) { return EvalReport::from_json(parse_run_json(eval, name)); };
  const EvalReport vanilla = load("retrieval.vanilla.json");
  const EvalReport revised = load("retrieval.revised.json");
  const EvalReport finetuned = load("retrieval.finetuned.json");
  const EvalReport tv = load("translation.vanilla.json");
  const EvalReport tr = load("translation.revised.json");
  const json summary = parse_run_json(eval, "summary.json");
  json config = parse_run_json(run_dir, "config.json");
  config.erase("output_dir");
  if (!vanilla.retrieval_accuracy || !revised.retrieval_accuracy || !finetuned.retrieval_accuracy ||
      !tv.token_accuracy || !tr.token_accuracy) {
    throw DataError(DataErrorKind::kFormat, run_dir.string() + ": eval report lacks an accuracy");
  }

  double domain_diff = 0.0, delta_norm = 0.0;
  std::string config_hash;
  try {
    domain_diff = summary.at("domain_difference").get<double>();
    delta_norm = summary.at("mean_delta_norm").get<double>();
    config_hash = summary.at("config_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(DataErrorKind::kFormat, (eval / "summary.json").string() + ": " + e.what());
  }

  const double delta = *revised.retrieval_accuracy - *vanilla.retrieval_accuracy;
  ExperimentReport report;
  report.json = {
      {"config_hash", config_hash},
      {"config", config},
      {"retrieval_accuracy",
       {{"vanilla", *vanilla.retrieval_accuracy},
        {"revised", *revised.retrieval_accuracy},
        {"finetuned", *finetuned.retrieval_accuracy},
        {"delta", delta}}},
      {"positions_evaluated", vanilla.evaluated},
      {"token_accuracy", {{"vanilla", *tv.token_accuracy}, {"revised", *tr.token_accuracy}}},
      {"mean_delta_norm", delta_norm},
      {"domain_difference", domain_diff},
  };

  std::ostringstream t;
  t << "revknn experiment report\n";
  t << "config hash        " << config_hash << "\n\n";
  t << "                     vanilla   revised   finetuned\n";
  t << "retrieval accuracy   " << format_accuracy(vanilla.retrieval_accuracy) << "    "
    << format_accuracy(revised.retrieval_accuracy) << "    "
    << format_accuracy(finetuned.retrieval_accuracy) << "\n";
  t << "token accuracy       " << format_accuracy(tv.token_accuracy) << "    "
    << format_accuracy(tr.token_accuracy) << "    -\n\n";
  t << "delta (revised - vanilla)  " << format_number(delta) << "\n";
  t << "mean |dk|                  " << format_number(delta_norm) << "\n";
  t << "domain difference          " << format_number(domain_diff) << "\n";
  t << "positions evaluated        " << vanilla.evaluated << "\n\n";
  t << "config\n" << config.dump(2) << "\n";
  report.text = t.str();
  return report;
}

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"kNN-MT with offline datastore key revision"};
  app.require_subcommand(1);

  Common common;
  std::string out, corpus, vocab, model, ds, dir, a, b, records, reviser_path;
  PairPaths pairs;
  RevisePaths rev;
  bool as_json = false, quiet = false;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic two-domain corpora");
  add_config(gen, common);
  add_data_flags(gen, common.ov);
  gen->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train-model", "Train the upstream model");
  add_config(train, common);
  add_model_flags(train, common.ov);
  add_train_flags(train, common.ov);
  train->add_option("--corpus", corpus)->required();
  train->add_option("--vocab", vocab)->required();
  train->add_option("--out", out)->required();

  auto* fine = app.add_subcommand("finetune-model", "Fine-tune a model on a downstream corpus");
  add_config(fine, common);
  add_train_flags(fine, common.ov);
  fine->add_option("--model", model)->required();
  fine->add_option("--corpus", corpus)->required();
  fine->add_option("--out", out)->required();

  auto* build = app.add_subcommand("build-datastore", "Traverse a corpus into a datastore");
  build->add_option("--model", model)->required();
  build->add_option("--corpus", corpus)->required();
  build->add_option("--out", out)->required();

  auto* coll = app.add_subcommand("collect-pairs", "Build reviser training records");
  add_config(coll, common);
  coll->add_option("--n-k", common.ov.n_k);
  coll->add_option("--r", common.ov.r_percent, "Percent of keys kept");
  coll->add_option("--upstream-model", pairs.up_model)->required();
  coll->add_option("--downstream-model", pairs.down_model)->required();
  coll->add_option("--upstream-datastore", pairs.up_ds)->required();
  coll->add_option("--downstream-datastore", pairs.down_ds)->required();
  coll->add_option("--corpus", pairs.corpus)->required();
  coll->add_option("--out", pairs.out)->required();

  auto* trev = app.add_subcommand("train-reviser", "Train the key reviser");
  add_config(trev, common);
  add_reviser_flags(trev, common.ov);
  trev->add_option("--records", records)->required();
  trev->add_option("--out", out)->required();

  auto* revise = app.add_subcommand("revise-datastore", "Apply a reviser to every key");
  revise->add_option("--upstream-datastore", rev.up_ds)->required();
  revise->add_option("--downstream-datastore", rev.down_ds)->required();
  revise->add_option("--reviser", rev.reviser)->required();
  revise->add_option("--upstream-model", rev.up_model)->required();
  revise->add_option("--downstream-model", rev.down_model)->required();
  revise->add_option("--out", rev.out)->required();

  auto* tr = app.add_subcommand("translate", "Greedy kNN-MT decoding of a corpus's sources");
  add_config(tr, common);
  add_decode_flags(tr, common.ov);
  tr->add_option("--model", model)->required();
  tr->add_option("--datastore", ds)->required();
  tr->add_option("--corpus", corpus)->required();
  tr->add_option("--out", out);

  auto* er = app.add_subcommand("eval-retrieval", "Teacher-forced retrieval accuracy");
  add_config(er, common);
  add_retrieval_flags(er, common.ov);
  er->add_option("--skip", common.ov.skip, "Token ids excluded from scoring");
  er->add_option("--model", model)->required();
  er->add_option("--datastore", ds)->required();
  er->add_option("--corpus", corpus)->required();
  er->add_option("--out", out);

  auto* et = app.add_subcommand("eval-translate", "Token accuracy of kNN-MT translations");
  add_config(et, common);
  add_decode_flags(et, common.ov);
  et->add_option("--model", model)->required();
  et->add_option("--datastore", ds)->required();
  et->add_option("--corpus", corpus)->required();
  et->add_option("--out", out);

  auto* dd = app.add_subcommand("domain-diff", "TF-IDF domain difference of two corpora");
  dd->add_option("a", a)->required();
  dd->add_option("b", b)->required();
  dd->add_option("--out", out);

  auto* run = app.add_subcommand("run-experiment", "Full pipeline with vanilla/revised comparison");
  add_config(run, common);
  add_data_flags(run, common.ov);
  add_reviser_flags(run, common.ov);
  add_decode_flags(run, common.ov);
  run->add_option("--r", common.ov.r_percent, "Percent of keys kept");
  run->add_option("--out", out, "Output directory (overrides config)");
  run->add_flag("--quiet", quiet, "Do not print the report");

  auto* rep = app.add_subcommand("report", "Render the report of a finished run");
  rep->add_option("--run", dir)->required();
  rep->add_flag("--json", as_json);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  return run_guarded([&]() -> int {
    if (*gen) return cmd_gen_data(common, out);
    if (*train) return cmd_train_model(common, corpus, vocab, out);
    if (*fine) return cmd_finetune(common, model, corpus, out);
    if (*build) return cmd_build_datastore(model, corpus, out);
    if (*coll) return cmd_collect_pairs(common, pairs);
    if (*trev) return cmd_train_reviser(common, records, out);
    if (*revise) return cmd_revise(rev);
    if (*tr) return cmd_translate(common, model, ds, corpus, out);
    if (*er) return cmd_eval_retrieval(common, model, ds, corpus, out);
    if (*et) return cmd_eval_translate(common, model, ds, corpus, out);
    if (*dd) return cmd_domain_diff(a, b, out);
    if (*run) return cmd_run_experiment(common, out, quiet);
    if (*rep) return cmd_report(dir, as_json);
    return kExitUsage;
  });
}

}  // namespace revknn::cli
