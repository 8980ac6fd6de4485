#include "pens/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "pens/ensemble.hpp"
#include "pens/error.hpp"
#include "pens/rng.hpp"

namespace pens {

std::string_view experiment_name(ExperimentId id) {
  switch (id) {
    case ExperimentId::exp1: return "exp1";
    case ExperimentId::exp2: return "exp2";
    case ExperimentId::exp3: return "exp3";
    case ExperimentId::exp4: return "exp4";
  }
  return "?";
}

ExperimentId parse_experiment(std::string_view name) {
  for (auto id : {ExperimentId::exp1, ExperimentId::exp2, ExperimentId::exp3, ExperimentId::exp4}) {
    if (experiment_name(id) == name) return id;
  }
  throw Error("unknown experiment '" + std::string(name) + "' (expected exp1..exp4)");
}

EmbeddingSpec EmbeddingSpec::parse(std::string_view text) {
  EmbeddingSpec spec;
  constexpr std::string_view kPrefix = "pretrained:";
  if (text.starts_with(kPrefix)) {
    spec.source = EmbeddingSource::pretrained;
    spec.path = std::string(text.substr(kPrefix.size()));
    if (spec.path.empty()) throw Error("pretrained embedding needs a path: pretrained:<file>");
    spec.name = spec.path.stem().string();
    return spec;
  }
  spec.source = parse_embedding_source(text);
  if (spec.source == EmbeddingSource::pretrained) {
    throw Error("pretrained embedding needs a path: pretrained:<file>");
  }
  spec.name = std::string(text);
  return spec;
}

// -- Settings ------------------------------------------------------------------------------

ModelSettings ModelSettings::read(ConfigReader& r) {
  ModelSettings s;
  ModelConfig& c = s.base;
  c.embedding_dim = r.unsigned_int("embedding_dim", c.embedding_dim);
  c.batch_size = r.unsigned_int("batch_size", c.batch_size);
  s.epochs = r.unsigned_int("epochs", 0);
  c.optimizer.learning_rate = r.real("learning_rate", c.optimizer.learning_rate);
  c.optimizer.beta1 = r.real("beta1", c.optimizer.beta1);
  c.optimizer.beta2 = r.real("beta2", c.optimizer.beta2);
  c.optimizer.epsilon = r.real("epsilon", c.optimizer.epsilon);
  c.conv_filters = r.unsigned_int("conv_filters", c.conv_filters);
  c.kernel_size = r.unsigned_int("kernel_size", c.kernel_size);
  c.dense_units = r.unsigned_int("dense_units", c.dense_units);
  c.dropout = r.real("dropout", c.dropout);
  c.hidden_units = r.unsigned_int("hidden_units", c.hidden_units);
  c.spatial_dropout = r.real("spatial_dropout", c.spatial_dropout);
  c.min_count = r.unsigned_int("min_count", c.min_count);
  s.freeze_pretrained = r.boolean("freeze_pretrained", true);
  if (c.batch_size < 1) r.problem("batch_size must be >= 1");
  if (c.embedding_dim < 1) r.problem("embedding_dim must be >= 1");
  if (!(c.optimizer.learning_rate > 0)) r.problem("learning_rate must be > 0");
  if (!(c.dropout >= 0 && c.dropout < 1)) r.problem("dropout must be in [0, 1)");
  if (!(c.spatial_dropout >= 0 && c.spatial_dropout < 1)) r.problem("spatial_dropout must be in [0, 1)");
  return s;
}

ModelConfig ModelSettings::resolve(Architecture a, PoolKind pool, FeatureSpec feature,
                                   const EmbeddingSpec& embedding, std::uint64_t seed) const {
  ModelConfig c = base;
  c.architecture = a;
  c.pool = pool;
  c.feature = feature;
  c.epochs = epochs > 0 ? epochs : default_epochs(a);
  c.embedding_source = embedding.source;
  c.embedding_name = embedding.name;
  c.trainable_embeddings = embedding.source == EmbeddingSource::random || !freeze_pretrained;
  c.seed = seed;
  return c;
}

SkipGramConfig read_skipgram_settings(ConfigReader& r, std::size_t dim, std::uint64_t seed) {
  SkipGramConfig s;
  s.dim = r.unsigned_int("skipgram_dim", dim);
  s.window = r.unsigned_int("skipgram_window", s.window);
  s.epochs = r.unsigned_int("skipgram_epochs", s.epochs);
  s.negative_samples = r.unsigned_int("skipgram_negative", s.negative_samples);
  s.learning_rate = r.real("skipgram_learning_rate", s.learning_rate);
  s.min_count = r.unsigned_int("skipgram_min_count", s.min_count);
  s.seed = derive_seed(seed, "skipgram");
  return s;
}

ExperimentConfig ExperimentConfig::from_config(const Config& config) {
  ConfigReader r(config);
  ExperimentConfig c;
  const std::string id = r.string("experiment");
  try {
    if (!id.empty()) c.experiment = parse_experiment(id);
  } catch (const Error& e) {
    r.problem(e.what());
  }
  c.data_dir = r.string("data_dir");
  if (!c.data_dir.empty()) {
    for (const char* f : {"admitted.jsonl", "split.json"}) {
      if (!std::filesystem::exists(c.data_dir / f)) {
        r.problem("data_dir: " + (c.data_dir / f).string() + " does not exist");
      }
    }
  }
  c.seed = r.unsigned_int("seed", 1);
  c.threads = r.unsigned_int("threads", 1);
  if (c.threads < 1) r.problem("threads must be >= 1");

  const bool exp1 = c.experiment == ExperimentId::exp1;
  const bool exp3 = c.experiment == ExperimentId::exp3;
  const std::vector<std::uint64_t> default_words =
      exp1 ? std::vector<std::uint64_t>{20, 40, 60, 80, 100, 200, 300, 400}
           : std::vector<std::uint64_t>{60};
  for (auto w : r.unsigned_list("words", default_words)) {
    if (w < 1) r.problem("words: grid values must be >= 1");
    c.words.push_back(w);
  }

  const std::vector<std::string> all_arch = {"cnn", "lstm", "gru", "bilstm", "bigru"};
  const bool many_arch = exp3 || c.experiment == ExperimentId::exp4;
  for (const auto& a : r.list("architectures", many_arch ? all_arch : std::vector<std::string>{"cnn"})) {
    try {
      c.architectures.push_back(parse_architecture(a));
    } catch (const Error& e) {
      r.problem(std::string("architectures: ") + e.what());
    }
  }

  for (const auto& e : r.list("embeddings", std::vector<std::string>{"random"})) {
    try {
      auto spec = EmbeddingSpec::parse(e);
      if (spec.source == EmbeddingSource::pretrained && !std::filesystem::exists(spec.path)) {
        r.problem("embeddings: " + spec.path.string() + " does not exist");
      }
      c.embeddings.push_back(std::move(spec));
    } catch (const Error& err) {
      r.problem(std::string("embeddings: ") + err.what());
    }
  }

  std::vector<std::string> default_pools = {"all_sections", "title_abstract", "description", "claims"};
  if (exp1) default_pools.push_back("per_section_y");
  for (const auto& p : r.list("pools", default_pools)) {
    try {
      c.pools.push_back(parse_pool_kind(p));
    } catch (const Error& e) {
      r.problem(std::string("pools: ") + e.what());
    }
  }
  c.seeds = r.unsigned_list("seeds", std::vector<std::uint64_t>{c.seed});
  c.model = ModelSettings::read(r);
  c.skipgram = read_skipgram_settings(r, c.model.base.embedding_dim, c.seed);
  r.finish();
  return c;
}

// -- Data -----------------------------------------------------------------------------------

SplitDocuments load_prepared(const std::filesystem::path& data_dir) {
  const auto docs = read_documents(data_dir / "admitted.jsonl");
  return apply_split(docs, read_manifest(data_dir / "split.json"));
}

ResultRow make_row(std::string experiment, std::string pool, std::size_t words,
                   std::string architecture, std::string embedding, std::uint64_t seed,
                   const EvalReport& report) {
  ResultRow row{std::move(experiment), std::move(pool), words, std::move(architecture),
                std::move(embedding), seed, report.accuracy, {}, {}, {}};
  row.r_at_3 = report.recall_at.at(3);
  row.r_at_5 = report.recall_at.at(5);
  row.r_at_10 = report.recall_at.at(10);
  return row;
}

namespace {

struct Shared {
  const ExperimentConfig& config;
  const SplitDocuments& data;
  LabelVocabulary labels;
  GoldLabels test_gold;
  std::vector<std::shared_ptr<const EmbeddingTable>> tables;  // per embedding; null = random
};

std::shared_ptr<ClassifierModel> fit(const ModelConfig& cfg, const Shared& shared,
                                     const EmbeddingTable* table) {
  std::vector<Tokens> train_tokens;
  train_tokens.reserve(shared.data.train.size());
  for (const auto& d : shared.data.train) {
    train_tokens.push_back(model_input_tokens(d, cfg.pool, cfg.feature));
  }
  Vocabulary vocab = Vocabulary::build(train_tokens, cfg.min_count);
  ModelConfig config = cfg;
  EmbeddingMatrix matrix;
  const auto embed_seed = derive_seed(cfg.seed, "embedding");
  if (table) {
    config.embedding_dim = table->dim();
    matrix = assemble_matrix(vocab, *table, embed_seed);
  } else {
    matrix = random_matrix(vocab, config.embedding_dim, embed_seed);
  }
  auto model = std::make_shared<ClassifierModel>(
      ClassifierModel::build(config, vocab, shared.labels, matrix));
  const auto train_set =
      encode_examples(shared.data.train, cfg.pool, cfg.feature, vocab, shared.labels);
  const auto val_set =
      encode_examples(shared.data.validation, cfg.pool, cfg.feature, vocab, shared.labels);
  train(*model, train_set, val_set);
  return model;
}

EvalReport evaluate_model(const ClassifierModel& model, const Shared& shared) {
  return evaluate(rank_documents(model, shared.data.test), shared.test_gold);
}

struct GridPoint {
  PoolKind pool = PoolKind::all_sections;
  std::size_t words = 0;
  Architecture architecture = Architecture::cnn;
  std::size_t embedding = 0;
  std::uint64_t seed = 0;

  std::string describe(const ExperimentConfig& c) const {
    std::string s = std::string(experiment_name(c.experiment));
    if (c.experiment != ExperimentId::exp4) s += " pool=" + std::string(pool_name(pool));
    return s + " words=" + std::to_string(words) + " arch=" + std::string(architecture_name(architecture)) +
           " embedding=" + c.embeddings[embedding].name + " seed=" + std::to_string(seed);
  }
};

struct Outcome {
  std::vector<ResultRow> rows;
  std::vector<HistoryRow> history;
  std::optional<ImprovementEntry> improvement;
  std::vector<std::string> checks;
  std::optional<std::string> failure;
};

void run_single(const GridPoint& p, const Shared& shared, Outcome& out) {
  const auto& c = shared.config;
  const auto& emb = c.embeddings[p.embedding];
  const FeatureSpec feature{p.pool == PoolKind::per_section_y ? FeatureSpec::Mode::first_y_per_section
                                                              : FeatureSpec::Mode::first_x,
                            p.words};
  const std::string exp(experiment_name(c.experiment));
  const std::string pool(pool_name(p.pool));
  const std::string arch(architecture_name(p.architecture));
  const auto seed = derive_seed(p.seed, exp + "/" + pool + "/" + std::to_string(p.words) + "/" +
                                            arch + "/" + emb.name);
  const auto cfg = c.model.resolve(p.architecture, p.pool, feature, emb, seed);
  const auto model = fit(cfg, shared, shared.tables[p.embedding].get());
  const auto report = evaluate_model(*model, shared);
  out.rows.push_back(make_row(exp, pool, p.words, arch, emb.name, p.seed, report));
  out.history.push_back({out.rows.back(), model->history()});
}

void run_ensemble(const GridPoint& p, const Shared& shared, Outcome& out) {
  const auto& c = shared.config;
  const auto& emb = c.embeddings[p.embedding];
  const std::string arch(architecture_name(p.architecture));
  const FeatureSpec feature{FeatureSpec::Mode::first_x, p.words};

  std::array<EnsembleMember, 3> members;
  std::array<EvalReport, 3> reports;
  for (std::size_t i = 0; i < 3; ++i) {
    const Section section = kSections[i];
    const std::string name(section_name(section));
    const PoolKind pool = parse_pool_kind(name);
    const auto seed = derive_seed(p.seed, "member:" + name + "/" + std::to_string(p.words) + "/" +
                                              arch + "/" + emb.name);
    const auto cfg = c.model.resolve(p.architecture, pool, feature, emb, seed);
    const auto model = fit(cfg, shared, shared.tables[p.embedding].get());
    reports[i] = evaluate_model(*model, shared);
    out.rows.push_back(make_row("exp4", name, p.words, arch, emb.name, p.seed, reports[i]));
    out.history.push_back({out.rows.back(), model->history()});
    members[i] = {section, model};
  }
  const EnsembleModel ensemble(members);
  const auto ensemble_report = evaluate(ensemble.predict_batch(shared.data.test), shared.test_gold);
  out.rows.push_back(make_row("exp4", "ensemble", p.words, arch, emb.name, p.seed, ensemble_report));
  out.improvement = ImprovementEntry{
      p.words, emb.name, p.seed,
      improvement_row(arch, {reports[0].accuracy, reports[1].accuracy, reports[2].accuracy},
                      ensemble_report.accuracy)};

  const auto& first = members[0];
  const EnsembleModel copies({first, first, first});
  const auto copy_report = evaluate(copies.predict_batch(shared.data.test), shared.test_gold);
  const bool same = copy_report.accuracy == reports[0].accuracy &&
                    copy_report.recall_at == reports[0].recall_at;
  out.checks.push_back("identity " + p.describe(c) + ": " + (same ? "ok" : "MISMATCH"));
}

std::map<std::string, double> mean_accuracy_by(const std::vector<ResultRow>& rows,
                                               std::string ResultRow::*field) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& [sum, n] = acc[r.*field];
    sum += r.accuracy.value();
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / static_cast<double>(v.second);
  return out;
}

void ordering_check(std::vector<std::string>& checks, const std::string& label,
                    const std::map<std::string, double>& means,
                    const std::vector<std::string>& expected) {
  std::vector<std::string> present;
  for (const auto& k : expected) {
    if (means.contains(k)) present.push_back(k);
  }
  for (std::size_t i = 0; i + 1 < present.size(); ++i) {
    const double a = means.at(present[i]);
    const double b = means.at(present[i + 1]);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: %s (%.4f) >= %s (%.4f): %s", label.c_str(),
                  present[i].c_str(), a, present[i + 1].c_str(), b, a >= b ? "ok" : "differs");
    checks.emplace_back(buf);
  }
}

void soft_checks(const ExperimentConfig& c, ExperimentResult& result) {
  if (c.experiment == ExperimentId::exp1) {
    ordering_check(result.checks, "exp1 pool order", mean_accuracy_by(result.rows, &ResultRow::pool),
                   {"per_section_y", "all_sections", "title_abstract", "description", "claims"});
  } else if (c.experiment == ExperimentId::exp3) {
    const auto means = mean_accuracy_by(result.rows, &ResultRow::architecture);
    for (const auto& [bi, uni] : {std::pair{"bilstm", "lstm"}, std::pair{"bigru", "gru"}}) {
      ordering_check(result.checks, "exp3 bidirectional", means, {bi, uni});
    }
  } else if (c.experiment == ExperimentId::exp4) {
    for (const auto& e : result.improvements) {
      result.checks.push_back("exp4 gain " + e.row.architecture + " words=" + std::to_string(e.words) +
                              " embedding=" + e.embedding + " seed=" + std::to_string(e.seed) + ": " +
                              e.row.improvement_percent() + "% " +
                              (e.row.ensemble > e.row.mean ? "ok" : "differs"));
    }
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const SplitDocuments& data) {
  if (data.train.empty() || data.test.empty()) throw Error("experiment needs train and test documents");
  Shared shared{config, data, {}, {}, {}};
  {
    std::vector<PatentDocument> all = data.train;
    all.insert(all.end(), data.validation.begin(), data.validation.end());
    all.insert(all.end(), data.test.begin(), data.test.end());
    shared.labels = LabelVocabulary::from_documents(all);
    shared.test_gold = gold_labels(data.test, shared.labels);
  }

  std::shared_ptr<const EmbeddingTable> skipgram;
  std::map<std::filesystem::path, std::shared_ptr<const EmbeddingTable>> pretrained;
  for (const auto& e : config.embeddings) {
    if (e.source == EmbeddingSource::random) {
      shared.tables.push_back(nullptr);
    } else if (e.source == EmbeddingSource::skipgram) {
      if (!skipgram) {
        std::vector<Tokens> docs;
        for (const auto& d : data.train) docs.push_back(tokenize(pool_text(d, PoolKind::all_sections)));
        std::cerr << "training skip-gram embeddings (dim " << config.skipgram.dim << ", "
                  << config.skipgram.epochs << " epochs)\n";
        skipgram = std::make_shared<const EmbeddingTable>(train_skipgram(docs, config.skipgram).table);
      }
      shared.tables.push_back(skipgram);
    } else {
      auto& slot = pretrained[e.path];
      if (!slot) slot = std::make_shared<const EmbeddingTable>(load_pretrained(e.path));
      shared.tables.push_back(slot);
    }
  }

  std::vector<GridPoint> grid;
  const bool exp4 = config.experiment == ExperimentId::exp4;
  const std::vector<PoolKind> pools = exp4 ? std::vector<PoolKind>{PoolKind::title_abstract} : config.pools;
  for (auto pool : pools) {
    for (auto words : config.words) {
      for (auto arch : config.architectures) {
        for (std::size_t e = 0; e < config.embeddings.size(); ++e) {
          for (auto seed : config.seeds) grid.push_back({pool, words, arch, e, seed});
        }
      }
    }
  }

  std::vector<Outcome> outcomes(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      const auto& p = grid[i];
      try {
        if (exp4) {
          run_ensemble(p, shared, outcomes[i]);
        } else {
          run_single(p, shared, outcomes[i]);
        }
        const std::lock_guard lock(log_mutex);
        std::cerr << "[" << i + 1 << "/" << grid.size() << "] " << p.describe(config)
                  << " accuracy=" << render(outcomes[i].rows.back().accuracy, 4) << "\n";
      } catch (const std::exception& e) {
        outcomes[i] = Outcome{};
        outcomes[i].failure = p.describe(config) + ": " + e.what();
        const std::lock_guard lock(log_mutex);
        std::cerr << "[" << i + 1 << "/" << grid.size() << "] FAILED " << *outcomes[i].failure << "\n";
      }
    }
  };
  const std::size_t workers = std::min(config.threads, grid.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  for (auto& o : outcomes) {
    for (auto& r : o.rows) result.rows.push_back(std::move(r));
    for (auto& h : o.history) result.history.push_back(std::move(h));
    if (o.improvement) result.improvements.push_back(std::move(*o.improvement));
    for (auto& c : o.checks) result.checks.push_back(std::move(c));
    if (o.failure) result.failures.push_back(std::move(*o.failure));
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const ResultRow& a, const ResultRow& b) { return a.key() < b.key(); });
  std::sort(result.history.begin(), result.history.end(),
            [](const HistoryRow& a, const HistoryRow& b) { return a.point.key() < b.point.key(); });
  std::sort(result.improvements.begin(), result.improvements.end(),
            [](const ImprovementEntry& a, const ImprovementEntry& b) {
              return std::tie(a.words, a.embedding, a.seed, a.row.architecture) <
                     std::tie(b.words, b.embedding, b.seed, b.row.architecture);
            });
  std::sort(result.checks.begin(), result.checks.end());
  soft_checks(config, result);
  return result;
}

// -- Output --------------------------------------------------------------------------------

std::string results_to_csv(std::span<const ResultRow> rows) {
  std::string out = "experiment,pool,words,architecture,embedding,seed,accuracy,r_at_3,r_at_5,r_at_10\n";
  for (const auto& r : rows) {
    out += r.experiment + "," + r.pool + "," + std::to_string(r.words) + "," + r.architecture + "," +
           r.embedding + "," + std::to_string(r.seed) + "," + render(r.accuracy, 6) + "," +
           render(r.r_at_3, 6) + "," + render(r.r_at_5, 6) + "," + render(r.r_at_10, 6) + "\n";
  }
  return out;
}

std::string history_to_csv(std::span<const HistoryRow> rows) {
  std::string out =
      "experiment,pool,words,architecture,embedding,seed,epoch,train_loss,train_accuracy,validation_accuracy\n";
  char buf[128];
  for (const auto& h : rows) {
    const auto& p = h.point;
    const std::string prefix = p.experiment + "," + p.pool + "," + std::to_string(p.words) + "," +
                               p.architecture + "," + p.embedding + "," + std::to_string(p.seed) + ",";
    const auto& t = h.history;
    for (std::size_t e = 0; e < t.epoch_train_loss.size(); ++e) {
      const double val = e < t.epoch_validation_accuracy.size() ? t.epoch_validation_accuracy[e] : -1.0;
      std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", e + 1, t.epoch_train_loss[e],
                    t.epoch_train_accuracy[e], val);
      out += prefix + buf;
    }
  }
  return out;
}

std::string improvements_to_csv(std::span<const ImprovementEntry> entries) {
  std::string out =
      "words,embedding,seed,architecture,member_1,member_2,member_3,mean,ensemble,improvement_pct\n";
  for (const auto& e : entries) {
    const auto& r = e.row;
    out += std::to_string(e.words) + "," + e.embedding + "," + std::to_string(e.seed) + "," +
           r.architecture;
    for (const auto& m : r.members) out += "," + render_percent(m);
    out += "," + r.mean_percent() + "," + render_percent(r.ensemble) + "," + r.improvement_percent() + "\n";
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "results.csv", results_to_csv(result.rows));
  write_text(out_dir / "history.csv", history_to_csv(result.history));
  if (!result.improvements.empty()) {
    write_text(out_dir / "improvement.csv", improvements_to_csv(result.improvements));
  }
  std::string checks;
  for (const auto& c : result.checks) checks += c + "\n";
  for (const auto& f : result.failures) checks += "FAILED " + f + "\n";
  write_text(out_dir / "checks.txt", checks);
}

}  // namespace pens
