#include "pens/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "pens/corpus.hpp"
#include "pens/embeddings.hpp"
#include "pens/ensemble.hpp"
#include "pens/error.hpp"
#include "pens/experiment.hpp"
#include "pens/models.hpp"
#include "pens/rng.hpp"
#include "pens/synthetic.hpp"

namespace pens {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

fs::path output_dir(ConfigReader& r) {
  (void)r.unsigned_int("threads", 1);
  return r.string("out");
}

std::vector<PatentDocument> split_part(const SplitDocuments& data, const std::string& name) {
  if (name == "test") return data.test;
  if (name == "validation") return data.validation;
  if (name == "train") return data.train;
  throw ConfigError({"split: '" + name + "' is not one of test, validation, train"});
}

void write_report(const fs::path& out, const EvalReport& report, const LabelVocabulary& labels) {
  write_text(out / "report.json", report_to_json(report, labels.codes()));
  write_text(out / "report.csv", report_to_csv(report));
}

}  // namespace

int cmd_prep(const Config& config, std::ostream& log) {
  ConfigReader r(config);
  const fs::path corpus = r.string("corpus");
  const auto format_name =
      r.string("format", corpus.extension() == ".jsonl" ? std::string("jsonl") : std::string("xml"));
  const auto seed = r.unsigned_int("seed", 1);
  const fs::path out = output_dir(r);
  r.finish();

  if (!fs::exists(corpus)) throw Error("cannot read corpus " + corpus.string());
  const auto records = parse_corpus(corpus, parse_input_format(format_name));
  const auto docs = filter_admitted(records);
  log << records.size() << " records, " << docs.size() << " admitted\n";

  fs::create_directories(out / "pools");
  write_jsonl(out / "admitted.jsonl", docs);
  for (const auto& [kind, pool] : build_pools(docs)) {
    write_text(out / "pools" / (std::string(pool_name(kind)) + ".jsonl"), pool_to_jsonl(pool));
  }
  if (docs.size() >= 10) {
    write_manifest(out / "split.json", split(docs, seed));
  } else {
    log << "warning: " << docs.size() << " admitted documents; too few documents to split, "
        << "split.json not written\n";
  }
  write_text(out / "stats.csv", stats_to_csv(section_stats(docs)));
  return 0;
}

int cmd_synth(const Config& config, std::ostream& log) {
  ConfigReader r(config);
  SyntheticCorpusSpec spec;
  spec.num_docs = r.unsigned_int("num_docs", spec.num_docs);
  spec.num_labels = r.unsigned_int("num_labels", spec.num_labels);
  spec.vocabulary_size = r.unsigned_int("vocabulary_size", spec.vocabulary_size);
  spec.p_signal = r.real("p_signal", spec.p_signal);
  spec.min_filler_words = r.unsigned_int("min_filler_words", spec.min_filler_words);
  spec.max_filler_words = r.unsigned_int("max_filler_words", spec.max_filler_words);
  spec.seed = r.unsigned_int("seed", spec.seed);
  const fs::path out = output_dir(r);
  r.finish();

  const auto docs = generate_synthetic(spec);
  write_text(out / "corpus.jsonl", to_jsonl(docs));
  log << "wrote " << docs.size() << " documents over " << spec.num_labels << " labels\n";
  return 0;
}

int cmd_train_embeddings(const Config& config, std::ostream& log) {
  ConfigReader r(config);
  const fs::path data_dir = r.string("data_dir");
  const auto seed = r.unsigned_int("seed", 1);
  const auto dim = r.unsigned_int("embedding_dim", 300);
  const auto settings = read_skipgram_settings(r, dim, seed);
  const fs::path out = output_dir(r);
  r.finish();
  settings.validate();

  const auto data = load_prepared(data_dir);
  std::vector<Tokens> docs;
  for (const auto& d : data.train) docs.push_back(tokenize(pool_text(d, PoolKind::all_sections)));
  const auto result = train_skipgram(docs, settings);
  fs::create_directories(out);
  result.table.save(out / "skipgram.vec");
  std::string loss = "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", e + 1, result.epoch_loss[e]);
    loss += buf;
  }
  write_text(out / "skipgram_loss.csv", loss);
  log << "trained " << result.table.size() << " vectors of dim " << result.table.dim() << "\n";
  return 0;
}

int cmd_train(const Config& config, std::ostream& log) {
  ConfigReader r(config);
  const fs::path data_dir = r.string("data_dir");
  const auto arch_name = r.string("architecture", std::string("cnn"));
  const auto pool_text_name = r.string("pool", std::string("title_abstract"));
  const auto words = r.unsigned_int("words", 60);
  const auto mode_text = r.string("mode", std::string());
  const auto embedding_text = r.string("embedding", std::string("random"));
  const auto seed = r.unsigned_int("seed", 1);
  const auto settings = ModelSettings::read(r);
  const auto skipgram = read_skipgram_settings(r, settings.base.embedding_dim, seed);
  const fs::path out = output_dir(r);

  Architecture arch{};
  PoolKind pool{};
  EmbeddingSpec embedding;
  FeatureSpec feature;
  try {
    arch = parse_architecture(arch_name);
    pool = parse_pool_kind(pool_text_name);
    embedding = EmbeddingSpec::parse(embedding_text);
    feature.mode = !mode_text.empty()             ? parse_mode(mode_text)
                   : pool == PoolKind::per_section_y ? FeatureSpec::Mode::first_y_per_section
                                                     : FeatureSpec::Mode::first_x;
    feature.words = words;
  } catch (const Error& e) {
    r.problem(e.what());
  }
  r.finish();

  const auto data = load_prepared(data_dir);
  std::vector<PatentDocument> all = data.train;
  all.insert(all.end(), data.validation.begin(), data.validation.end());
  all.insert(all.end(), data.test.begin(), data.test.end());
  const auto labels = LabelVocabulary::from_documents(all);

  const auto cfg = settings.resolve(arch, pool, feature, embedding, derive_seed(seed, "train"));
  std::vector<Tokens> train_tokens;
  for (const auto& d : data.train) train_tokens.push_back(model_input_tokens(d, pool, feature));
  Vocabulary vocab = Vocabulary::build(train_tokens, cfg.min_count);

  ModelConfig model_cfg = cfg;
  EmbeddingMatrix matrix;
  const auto embed_seed = derive_seed(cfg.seed, "embedding");
  if (embedding.source == EmbeddingSource::random) {
    matrix = random_matrix(vocab, cfg.embedding_dim, embed_seed);
  } else {
    EmbeddingTable table = embedding.source == EmbeddingSource::pretrained
                               ? load_pretrained(embedding.path)
                               : [&] {
                                   std::vector<Tokens> docs;
                                   for (const auto& d : data.train) {
                                     docs.push_back(tokenize(pool_text(d, PoolKind::all_sections)));
                                   }
                                   auto sg = skipgram;
                                   sg.dim = cfg.embedding_dim;
                                   return train_skipgram(docs, sg).table;
                                 }();
    model_cfg.embedding_dim = table.dim();
    matrix = assemble_matrix(vocab, table, embed_seed);
  }

  auto model = ClassifierModel::build(model_cfg, vocab, labels, matrix);
  const auto train_set = encode_examples(data.train, pool, feature, vocab, labels);
  const auto val_set = encode_examples(data.validation, pool, feature, vocab, labels);
  const auto history = train(model, train_set, val_set);

  fs::create_directories(out);
  save_checkpoint(model, out / "model.ckpt");
  write_text(out / "history.csv", history.to_csv());
  write_text(out / "config.json", config_to_json(model.config()));
  if (!history.epoch_validation_accuracy.empty()) {
    log << "final validation accuracy " << history.epoch_validation_accuracy.back() << "\n";
  }
  return 0;
}

int cmd_eval(const Config& config, std::ostream& log) {
  ConfigReader r(config);
  const fs::path checkpoint = r.string("checkpoint");
  const fs::path data_dir = r.string("data_dir");
  const auto split_name = r.string("split", std::string("test"));
  (void)r.unsigned_int("seed", 1);
  const fs::path out = output_dir(r);
  r.finish();

  const auto model = load_checkpoint(checkpoint);
  const auto docs = split_part(load_prepared(data_dir), split_name);
  const auto report = evaluate(rank_documents(model, docs), gold_labels(docs, model.labels()));
  write_report(out, report, model.labels());
  log << "accuracy " << render(report.accuracy, 6) << " on " << report.num_docs << " documents\n";
  return 0;
}

int cmd_ensemble_eval(const Config& config, std::ostream& log) {
  ConfigReader r(config);
  const auto manifest_path = r.string("manifest", std::string());
  const auto checkpoints = config.has("checkpoints") ? r.list("checkpoints") : std::vector<std::string>{};
  const auto sections = r.list("sections", std::vector<std::string>{"title_abstract", "description", "claims"});
  const fs::path data_dir = r.string("data_dir");
  const auto split_name = r.string("split", std::string("test"));
  (void)r.unsigned_int("seed", 1);
  const fs::path out = output_dir(r);
  if (manifest_path.empty() == checkpoints.empty()) {
    r.problem("give either 'manifest' or 'checkpoints' (three paths)");
  }
  if (!checkpoints.empty() && checkpoints.size() != 3) r.problem("checkpoints: expected three paths");
  if (sections.size() != 3) r.problem("sections: expected three sections");
  r.finish();

  fs::path manifest_file = manifest_path;
  if (manifest_file.empty()) {
    EnsembleManifest manifest;
    for (std::size_t i = 0; i < 3; ++i) {
      manifest.members[i].section = parse_section(sections[i]);
      manifest.members[i].checkpoint = fs::absolute(checkpoints[i]);
      manifest.members[i].feature = load_checkpoint(checkpoints[i]).config().feature;
    }
    manifest_file = out / "ensemble.json";
    fs::create_directories(out);
    write_ensemble_manifest(manifest_file, manifest);
  }
  const auto ensemble = load_ensemble(manifest_file);
  const auto docs = split_part(load_prepared(data_dir), split_name);
  const auto gold = gold_labels(docs, ensemble.labels());
  const auto report = evaluate(ensemble.predict_batch(docs), gold);
  write_report(out, report, ensemble.labels());

  std::string members = "member,section,accuracy,r_at_3,r_at_5,r_at_10\n";
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& m = ensemble.members()[i];
    const std::string pool(section_name(m.section));
    ModelConfig cfg = m.model->config();
    std::vector<TokenSequence> seqs;
    for (const auto& d : docs) {
      seqs.push_back(encode(model_input_tokens(d, parse_pool_kind(pool), cfg.feature), m.model->vocabulary(),
                            cfg.feature.sequence_length(), d.doc_id));
    }
    const auto probs = m.model->predict_proba(seqs);
    std::vector<PredictionRanking> rankings;
    for (std::size_t d = 0; d < docs.size(); ++d) rankings.push_back(rank_labels(docs[d].doc_id, probs[d]));
    const auto rep = evaluate(rankings, gold);
    members += std::to_string(i + 1) + "," + pool + "," + render(rep.accuracy, 6) + "," +
               render(rep.recall_at.at(3), 6) + "," + render(rep.recall_at.at(5), 6) + "," +
               render(rep.recall_at.at(10), 6) + "\n";
  }
  write_text(out / "members.csv", members);
  log << "ensemble accuracy " << render(report.accuracy, 6) << " on " << report.num_docs << " documents\n";
  return 0;
}

int cmd_experiment(const Config& config, std::ostream& log) {
  const auto out = config.find("out");
  std::vector<std::string> problems;
  if (!out) problems.push_back("missing required key 'out'");
  Config experiment_config;
  for (const auto& [k, v] : config.entries()) {
    if (k != "out") experiment_config.set(k, v);
  }
  ExperimentConfig exp;
  try {
    exp = ExperimentConfig::from_config(experiment_config);
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));

  const auto data = load_prepared(exp.data_dir);
  const auto result = run_experiment(exp, data);
  write_experiment_outputs(result, *out);
  log << result.rows.size() << " result rows, " << result.failures.size() << " failed grid points\n";
  return 0;
}

}  // namespace pens
