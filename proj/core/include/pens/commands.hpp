#pragma once

// Subcommands of the `pens` tool. Each reads its settings from a Config
// (file values already merged with flag overrides), writes under the `out`
// key's directory and returns a process exit code. Errors are thrown.

#include <iosfwd>

#include "pens/config.hpp"

namespace pens {

/// corpus, format (xml|jsonl, default by extension), seed, out. Writes
/// admitted.jsonl, pools/<kind>.jsonl, split.json and stats.csv. split.json
/// is skipped, with a warning, below the 10 documents a split needs.
int cmd_prep(const Config& config, std::ostream& log);

/// num_docs, num_labels, vocabulary_size, p_signal, min_filler_words,
/// max_filler_words, seed, out. Writes corpus.jsonl.
int cmd_synth(const Config& config, std::ostream& log);

/// data_dir, skipgram_* settings, embedding_dim, seed, out. Trains on the
/// training split's full text; writes skipgram.vec and skipgram_loss.csv.
int cmd_train_embeddings(const Config& config, std::ostream& log);

/// data_dir, architecture, pool, words, mode, embedding, model settings,
/// seed, out. Writes model.ckpt, history.csv and config.json.
int cmd_train(const Config& config, std::ostream& log);

/// checkpoint, data_dir, split (test|validation|train), out. Writes
/// report.json and report.csv.
int cmd_eval(const Config& config, std::ostream& log);

/// manifest, or checkpoints (three paths) with optional sections; data_dir,
/// split, out. Writes report.json, report.csv and members.csv.
int cmd_ensemble_eval(const Config& config, std::ostream& log);

/// See ExperimentConfig; out receives results.csv and friends.
int cmd_experiment(const Config& config, std::ostream& log);

}  // namespace pens
