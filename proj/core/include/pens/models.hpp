#pragma once

// The five standalone classifiers (CNN, LSTM, GRU, Bi-LSTM, Bi-GRU), their
// training loop, batched inference and checkpoints.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pens/corpus.hpp"
#include "pens/embeddings.hpp"
#include "pens/evaluation.hpp"
#include "pens/layers.hpp"
#include "pens/optim.hpp"
#include "pens/textprep.hpp"

namespace pens {

enum class Architecture { cnn, lstm, gru, bilstm, bigru };
std::string_view architecture_name(Architecture a);
Architecture parse_architecture(std::string_view name);
bool is_recurrent(Architecture a);
/// 5 for the CNN, 15 for the recurrent models.
std::size_t default_epochs(Architecture a);

enum class EmbeddingSource { random, pretrained, skipgram };
std::string_view embedding_source_name(EmbeddingSource s);
EmbeddingSource parse_embedding_source(std::string_view name);

struct ModelConfig {
  Architecture architecture = Architecture::cnn;
  PoolKind pool = PoolKind::title_abstract;
  FeatureSpec feature;

  EmbeddingSource embedding_source = EmbeddingSource::random;
  std::string embedding_name = "random";  // provenance label, e.g. a file stem
  std::size_t embedding_dim = 300;
  bool trainable_embeddings = true;
  std::size_t min_count = 1;

  std::size_t batch_size = 128;
  std::size_t epochs = 5;
  AdamConfig optimizer;
  std::uint64_t seed = 1;

  // CNN. dense_units == 0 drops the hidden dense layer.
  std::size_t conv_filters = 128;
  std::size_t kernel_size = 5;
  std::size_t dense_units = 1024;
  double dropout = 0.5;

  // RNN, per direction.
  std::size_t hidden_units = 128;
  double spatial_dropout = 0.1;

  std::string init = "glorot_uniform";

  /// Defaults with the architecture's epoch budget.
  static ModelConfig defaults_for(Architecture a);
  /// Throws ConfigError listing every problem.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Sub-class <-> output index. Codes are kept sorted so the mapping depends
/// only on the label inventory.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  static LabelVocabulary from_documents(std::span<const PatentDocument> docs);
  static LabelVocabulary from_codes(std::vector<std::string> codes);

  std::size_t size() const { return codes_.size(); }
  std::size_t index_of(const IpcSubclass& label) const;
  const std::string& code(std::size_t index) const { return codes_.at(index); }
  const std::vector<std::string>& codes() const { return codes_; }
  bool operator==(const LabelVocabulary&) const = default;

 private:
  std::vector<std::string> codes_;
};

struct EncodedExample {
  TokenSequence sequence;
  std::size_t label = 0;
};

struct TrainingHistory {
  std::vector<double> batch_loss;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_train_accuracy;
  std::vector<double> epoch_validation_accuracy;  // empty entries skipped when no validation set

  std::string to_csv() const;
};

class ClassifierModel {
 public:
  /// Builds the network for config.architecture with freshly initialised
  /// weights (seeded from config.seed) and `embeddings` as the lookup table.
  static ClassifierModel build(const ModelConfig& config, Vocabulary vocabulary,
                               LabelVocabulary labels, const EmbeddingMatrix& embeddings);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  const LabelVocabulary& labels() const { return labels_; }
  const NamedTensors& parameters() const { return parameters_; }
  /// Parameters the optimiser updates (excludes a frozen embedding matrix).
  std::vector<Tensor> trainable_parameters() const;

  TrainingHistory& history() { return history_; }
  const TrainingHistory& history() const { return history_; }

  std::size_t sequence_length() const { return config_.feature.sequence_length(); }

  /// Per-label probabilities [batch, labels].
  Tensor forward(std::span<const TokenSequence> batch, const ForwardContext& ctx) const;

  /// Eval-mode probabilities, batch_size sequences at a time. Throws when a
  /// sequence length differs from sequence_length().
  std::vector<ProbabilityVector> predict_proba(std::span<const TokenSequence> sequences) const;

 private:
  ModelConfig config_;
  Vocabulary vocabulary_;
  LabelVocabulary labels_;
  NamedTensors parameters_;
  TrainingHistory history_;

  std::shared_ptr<Embedding> embedding_;
  std::shared_ptr<Conv1D> conv_;
  std::shared_ptr<Dense> hidden_;
  std::shared_ptr<const RecurrentCell> forward_cell_;
  std::shared_ptr<const RecurrentCell> backward_cell_;
  std::shared_ptr<Dense> output_;
};

/// embedding -> conv1d -> max pool over time -> flatten -> dense(relu)
/// -> dropout -> dense(softmax)
ClassifierModel build_cnn(const ModelConfig& config, Vocabulary vocabulary,
                          LabelVocabulary labels, const EmbeddingMatrix& embeddings);

/// embedding -> spatial dropout -> (bi)LSTM/GRU -> dense(softmax)
ClassifierModel build_rnn(const ModelConfig& config, Vocabulary vocabulary,
                          LabelVocabulary labels, const EmbeddingMatrix& embeddings);

/// Minibatch cross-entropy training with Adam for config.epochs epochs. Batch
/// order is reshuffled every epoch from the model seed; the last partial
/// batch is trained on. Validation only feeds the history.
TrainingHistory train(ClassifierModel& model, std::span<const EncodedExample> train_set,
                      std::span<const EncodedExample> validation_set);

/// One-hot rows for `labels` over `num_labels` classes.
Tensor one_hot(std::span<const std::size_t> labels, std::size_t num_labels);

// -- Encoding helpers ------------------------------------------------------------

/// The words a model with `config` reads from `doc`: its pool text under the
/// feature spec (per-section selection for first_y_per_section).
Tokens model_input_tokens(const PatentDocument& doc, PoolKind pool, const FeatureSpec& feature);

std::vector<EncodedExample> encode_examples(std::span<const PatentDocument> docs,
                                            PoolKind pool, const FeatureSpec& feature,
                                            const Vocabulary& vocabulary,
                                            const LabelVocabulary& labels);

/// Rankings of `docs` under `model`, reading the model's own pool.
std::vector<PredictionRanking> rank_documents(const ClassifierModel& model,
                                              std::span<const PatentDocument> docs);

GoldLabels gold_labels(std::span<const PatentDocument> docs, const LabelVocabulary& labels);

// -- Checkpoints --------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian: "PENS", u32 version, u32 length + UTF-8 JSON block (config,
/// vocabulary, labels, tensor count, history), then per tensor: u32 name
/// length, name, u32 rank, u32 dims..., row-major f32 values.
std::string checkpoint_bytes(const ClassifierModel& model);
ClassifierModel checkpoint_from_bytes(std::string_view bytes);
void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(std::string_view text);

}  // namespace pens
