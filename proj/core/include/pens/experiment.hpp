#pragma once

// Config-driven grid runner for the four experiments: feature selection
// (exp1), embeddings (exp2), architectures (exp3) and the section ensemble
// (exp4).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "pens/config.hpp"
#include "pens/corpus.hpp"
#include "pens/embeddings.hpp"
#include "pens/evaluation.hpp"
#include "pens/models.hpp"

namespace pens {

enum class ExperimentId { exp1, exp2, exp3, exp4 };
std::string_view experiment_name(ExperimentId id);
ExperimentId parse_experiment(std::string_view name);

/// "random", "skipgram" or "pretrained:<path>" (named after the file stem).
struct EmbeddingSpec {
  EmbeddingSource source = EmbeddingSource::random;
  std::filesystem::path path;
  std::string name = "random";

  static EmbeddingSpec parse(std::string_view text);
};

/// Model hyperparameters shared by `train` and `experiment`. Reads
/// embedding_dim, batch_size, epochs (0 = architecture default),
/// learning_rate, beta1, beta2, epsilon, conv_filters, kernel_size,
/// dense_units, dropout, hidden_units, spatial_dropout, min_count and
/// freeze_pretrained.
struct ModelSettings {
  ModelConfig base;
  std::size_t epochs = 0;
  bool freeze_pretrained = true;

  static ModelSettings read(ConfigReader& reader);
  /// base with the architecture, pool, feature and embedding filled in.
  ModelConfig resolve(Architecture a, PoolKind pool, FeatureSpec feature,
                      const EmbeddingSpec& embedding, std::uint64_t seed) const;
};

SkipGramConfig read_skipgram_settings(ConfigReader& reader, std::size_t dim, std::uint64_t seed);

struct ExperimentConfig {
  ExperimentId experiment = ExperimentId::exp1;
  std::filesystem::path data_dir;  // admitted.jsonl + split.json from `prep`
  std::uint64_t seed = 1;
  std::vector<std::size_t> words;
  std::vector<Architecture> architectures;
  std::vector<EmbeddingSpec> embeddings;
  std::vector<PoolKind> pools;  // ignored by exp4
  std::vector<std::uint64_t> seeds;
  ModelSettings model;
  SkipGramConfig skipgram;
  std::size_t threads = 1;

  /// Per-experiment grid defaults; throws ConfigError listing every problem,
  /// including missing paths and unknown keys.
  static ExperimentConfig from_config(const Config& config);
};

struct ResultRow {
  std::string experiment;
  std::string pool;  // a pool kind, a section for exp4 members, or "ensemble"
  std::size_t words = 0;
  std::string architecture;
  std::string embedding;
  std::uint64_t seed = 0;
  Ratio accuracy;
  Ratio r_at_3;
  Ratio r_at_5;
  Ratio r_at_10;

  auto key() const { return std::tie(experiment, pool, words, architecture, embedding, seed); }
};

struct HistoryRow {
  ResultRow point;  // metrics unused
  TrainingHistory history;
};

struct ImprovementEntry {
  std::size_t words = 0;
  std::string embedding;
  std::uint64_t seed = 0;
  ImprovementRow row;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  // sorted by key
  std::vector<HistoryRow> history;
  std::vector<ImprovementEntry> improvements;
  std::vector<std::string> checks;    // soft qualitative checks, never fatal
  std::vector<std::string> failures;  // grid points that raised
};

/// Documents from a `prep` output directory, partitioned by its split.
SplitDocuments load_prepared(const std::filesystem::path& data_dir);

/// Trains and evaluates every grid point. Failing points are logged to
/// stderr, recorded in `failures` and skipped.
ExperimentResult run_experiment(const ExperimentConfig& config, const SplitDocuments& data);

/// Header: experiment,pool,words,architecture,embedding,seed,accuracy,r_at_3,r_at_5,r_at_10.
std::string results_to_csv(std::span<const ResultRow> rows);
std::string history_to_csv(std::span<const HistoryRow> rows);
std::string improvements_to_csv(std::span<const ImprovementEntry> entries);

/// results.csv, history.csv, checks.txt and, for exp4, improvement.csv.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir);

/// Metrics row for one evaluated grid point.
ResultRow make_row(std::string experiment, std::string pool, std::size_t words,
                   std::string architecture, std::string embedding, std::uint64_t seed,
                   const EvalReport& report);

}  // namespace pens
