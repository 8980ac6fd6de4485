#include "pens/models.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "pens/error.hpp"
#include "pens/rng.hpp"

namespace pens {

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::cnn: return "cnn";
    case Architecture::lstm: return "lstm";
    case Architecture::gru: return "gru";
    case Architecture::bilstm: return "bilstm";
    case Architecture::bigru: return "bigru";
  }
  return "?";
}

Architecture parse_architecture(std::string_view name) {
  for (auto a : {Architecture::cnn, Architecture::lstm, Architecture::gru,
                 Architecture::bilstm, Architecture::bigru}) {
    if (architecture_name(a) == name) return a;
  }
  throw Error("unknown architecture '" + std::string(name) +
              "' (expected cnn, lstm, gru, bilstm or bigru)");
}

bool is_recurrent(Architecture a) { return a != Architecture::cnn; }

std::size_t default_epochs(Architecture a) { return is_recurrent(a) ? 15 : 5; }

std::string_view embedding_source_name(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::random: return "random";
    case EmbeddingSource::pretrained: return "pretrained";
    case EmbeddingSource::skipgram: return "skipgram";
  }
  return "?";
}

EmbeddingSource parse_embedding_source(std::string_view name) {
  for (auto s : {EmbeddingSource::random, EmbeddingSource::pretrained, EmbeddingSource::skipgram}) {
    if (embedding_source_name(s) == name) return s;
  }
  throw Error("unknown embedding source '" + std::string(name) + "'");
}

ModelConfig ModelConfig::defaults_for(Architecture a) {
  ModelConfig c;
  c.architecture = a;
  c.epochs = default_epochs(a);
  return c;
}

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (feature.words < 1) problems.push_back("feature word count must be >= 1");
  if (embedding_dim < 1) problems.push_back("embedding_dim must be >= 1");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (epochs < 1) problems.push_back("epochs must be >= 1");
  if (!(optimizer.learning_rate > 0)) problems.push_back("learning_rate must be > 0");
  if (!(dropout >= 0 && dropout < 1)) problems.push_back("dropout must be in [0, 1)");
  if (!(spatial_dropout >= 0 && spatial_dropout < 1)) {
    problems.push_back("spatial_dropout must be in [0, 1)");
  }
  if (architecture == Architecture::cnn) {
    if (conv_filters < 1) problems.push_back("conv_filters must be >= 1");
    if (kernel_size < 1) problems.push_back("kernel_size must be >= 1");
    if (kernel_size > feature.sequence_length()) {
      problems.push_back("kernel_size " + std::to_string(kernel_size) +
                         " exceeds sequence length " +
                         std::to_string(feature.sequence_length()));
    }
  } else if (hidden_units < 1) {
    problems.push_back("hidden_units must be >= 1");
  }
  if (feature.mode == FeatureSpec::Mode::first_y_per_section && pool != PoolKind::per_section_y) {
    problems.push_back("first_y_per_section requires the per_section_y pool");
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

// -- LabelVocabulary --------------------------------------------------------------------

LabelVocabulary LabelVocabulary::from_documents(std::span<const PatentDocument> docs) {
  std::set<std::string> codes;
  for (const auto& d : docs) codes.insert(d.main_label.code());
  return from_codes({codes.begin(), codes.end()});
}

LabelVocabulary LabelVocabulary::from_codes(std::vector<std::string> codes) {
  for (const auto& c : codes) (void)IpcSubclass::of(c);
  std::sort(codes.begin(), codes.end());
  if (std::adjacent_find(codes.begin(), codes.end()) != codes.end()) {
    throw Error("label vocabulary has duplicate codes");
  }
  LabelVocabulary v;
  v.codes_ = std::move(codes);
  return v;
}

std::size_t LabelVocabulary::index_of(const IpcSubclass& label) const {
  const auto it = std::lower_bound(codes_.begin(), codes_.end(), label.code());
  if (it == codes_.end() || *it != label.code()) {
    throw Error("label " + label.code() + " is not in the label vocabulary");
  }
  return static_cast<std::size_t>(it - codes_.begin());
}

// -- History ---------------------------------------------------------------------------

std::string TrainingHistory::to_csv() const {
  std::string out = "epoch,train_loss,train_accuracy,validation_accuracy\n";
  char buf[128];
  for (std::size_t e = 0; e < epoch_train_loss.size(); ++e) {
    const double val = e < epoch_validation_accuracy.size() ? epoch_validation_accuracy[e] : -1.0;
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", e + 1, epoch_train_loss[e],
                  epoch_train_accuracy[e], val);
    out += buf;
  }
  return out;
}

// -- Construction ---------------------------------------------------------------------------

ClassifierModel ClassifierModel::build(const ModelConfig& config, Vocabulary vocabulary,
                                       LabelVocabulary labels,
                                       const EmbeddingMatrix& embeddings) {
  config.validate();
  if (embeddings.rows != vocabulary.size() || embeddings.dim != config.embedding_dim) {
    throw ShapeError("embedding matrix is " + std::to_string(embeddings.rows) + "x" +
                     std::to_string(embeddings.dim) + ", model expects " +
                     std::to_string(vocabulary.size()) + "x" +
                     std::to_string(config.embedding_dim));
  }
  if (labels.size() < 1) throw Error("label vocabulary is empty");

  ClassifierModel m;
  m.config_ = config;
  m.vocabulary_ = std::move(vocabulary);
  m.labels_ = std::move(labels);
  Rng rng(derive_seed(config.seed, "init"));

  std::vector<Real> values(embeddings.values.begin(), embeddings.values.end());
  m.embedding_ = std::make_shared<Embedding>(
      Tensor::from({embeddings.rows, embeddings.dim}, std::move(values)),
      config.trainable_embeddings);
  m.parameters_.emplace_back("embedding.matrix", m.embedding_->matrix());

  const std::size_t dim = config.embedding_dim;
  const std::size_t num_labels = m.labels_.size();
  const auto append = [&m](NamedTensors named) {
    for (auto& p : named) m.parameters_.push_back(std::move(p));
  };

  if (config.architecture == Architecture::cnn) {
    m.conv_ = std::make_shared<Conv1D>(dim, config.conv_filters, config.kernel_size, rng);
    append(m.conv_->parameters("conv"));
    std::size_t width = config.conv_filters;
    if (config.dense_units > 0) {
      m.hidden_ = std::make_shared<Dense>(width, config.dense_units, Activation::relu, rng);
      append(m.hidden_->parameters("hidden"));
      width = config.dense_units;
    }
    m.output_ = std::make_shared<Dense>(width, num_labels, Activation::softmax, rng);
  } else {
    const bool gru = config.architecture == Architecture::gru ||
                     config.architecture == Architecture::bigru;
    const bool bidirectional = config.architecture == Architecture::bilstm ||
                               config.architecture == Architecture::bigru;
    const auto make_cell = [&]() -> std::shared_ptr<const RecurrentCell> {
      if (gru) return std::make_shared<GRUCell>(dim, config.hidden_units, rng);
      return std::make_shared<LSTMCell>(dim, config.hidden_units, rng);
    };
    m.forward_cell_ = make_cell();
    append(m.forward_cell_->parameters("rnn.forward"));
    if (bidirectional) {
      m.backward_cell_ = make_cell();
      append(m.backward_cell_->parameters("rnn.backward"));
    }
    const std::size_t width = config.hidden_units * (bidirectional ? 2 : 1);
    m.output_ = std::make_shared<Dense>(width, num_labels, Activation::softmax, rng);
  }
  append(m.output_->parameters("output"));
  return m;
}

ClassifierModel build_cnn(const ModelConfig& config, Vocabulary vocabulary,
                          LabelVocabulary labels, const EmbeddingMatrix& embeddings) {
  if (config.architecture != Architecture::cnn) throw Error("build_cnn: architecture is not cnn");
  return ClassifierModel::build(config, std::move(vocabulary), std::move(labels), embeddings);
}

ClassifierModel build_rnn(const ModelConfig& config, Vocabulary vocabulary,
                          LabelVocabulary labels, const EmbeddingMatrix& embeddings) {
  if (!is_recurrent(config.architecture)) {
    throw Error("build_rnn: architecture must be lstm, gru, bilstm or bigru");
  }
  return ClassifierModel::build(config, std::move(vocabulary), std::move(labels), embeddings);
}

std::vector<Tensor> ClassifierModel::trainable_parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : parameters_) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

// -- Inference ---------------------------------------------------------------------------

Tensor ClassifierModel::forward(std::span<const TokenSequence> batch,
                                const ForwardContext& ctx) const {
  const std::size_t length = sequence_length();
  std::vector<std::int32_t> indices;
  std::vector<std::size_t> lengths;
  indices.reserve(batch.size() * length);
  for (const auto& s : batch) {
    if (s.indices.size() != length) {
      throw ShapeError("sequence '" + s.doc_id + "' has length " +
                       std::to_string(s.indices.size()) + ", model expects " +
                       std::to_string(length));
    }
    indices.insert(indices.end(), s.indices.begin(), s.indices.end());
    lengths.push_back(s.true_length);
  }
  const Tensor embedded = embedding_->forward(indices, batch.size(), length);

  if (config_.architecture == Architecture::cnn) {
    Tensor h = flatten(max_pool_over_time(conv_->forward(embedded)));
    if (hidden_) h = hidden_->forward(h);
    h = dropout(h, config_.dropout, ctx);
    return output_->forward(h);
  }
  const Tensor x = spatial_dropout(embedded, config_.spatial_dropout, ctx);
  const Tensor h = backward_cell_
                       ? Bidirectional(forward_cell_, backward_cell_).forward(x, lengths)
                       : run_recurrent(*forward_cell_, x, lengths, false);
  return output_->forward(h);
}

std::vector<ProbabilityVector> ClassifierModel::predict_proba(
    std::span<const TokenSequence> sequences) const {
  std::vector<ProbabilityVector> out;
  out.reserve(sequences.size());
  const ForwardContext eval{};
  const std::size_t classes = labels_.size();
  for (std::size_t start = 0; start < sequences.size(); start += config_.batch_size) {
    const std::size_t n = std::min(config_.batch_size, sequences.size() - start);
    const Tensor probs = forward(sequences.subspan(start, n), eval);
    const auto data = probs.data();
    for (std::size_t r = 0; r < n; ++r) {
      out.emplace_back(data.begin() + static_cast<std::ptrdiff_t>(r * classes),
                       data.begin() + static_cast<std::ptrdiff_t>((r + 1) * classes));
    }
  }
  return out;
}

// -- Training -----------------------------------------------------------------------------

Tensor one_hot(std::span<const std::size_t> labels, std::size_t num_labels) {
  std::vector<Real> values(labels.size() * num_labels, Real(0));
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= num_labels) throw Error("one_hot: label index out of range");
    values[r * num_labels + labels[r]] = Real(1);
  }
  return Tensor::from({labels.size(), num_labels}, std::move(values));
}

namespace {

std::size_t argmax(std::span<const Real> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

TrainingHistory train(ClassifierModel& model, std::span<const EncodedExample> train_set,
                      std::span<const EncodedExample> validation_set) {
  if (train_set.empty()) throw Error("train: empty training set");
  const ModelConfig& cfg = model.config();
  const std::size_t classes = model.labels().size();

  Adam optimizer(model.trainable_parameters(), cfg.optimizer);
  Rng order_rng(derive_seed(cfg.seed, "batch-order"));
  Rng mask_rng(derive_seed(cfg.seed, "dropout"));
  const ForwardContext ctx{true, &mask_rng};

  TrainingHistory history;
  std::vector<std::size_t> order(train_set.size());
  std::vector<TokenSequence> batch;
  std::vector<std::size_t> batch_labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      batch.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < start + n; ++i) {
        batch.push_back(train_set[order[i]].sequence);
        batch_labels.push_back(train_set[order[i]].label);
      }
      const Tensor probs = model.forward(batch, ctx);
      const Tensor loss = cross_entropy(probs, one_hot(batch_labels, classes));
      optimizer.zero_grad();
      loss.backward();
      optimizer.step();

      const double value = static_cast<double>(loss.item());
      history.batch_loss.push_back(value);
      loss_sum += value * static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) {
        if (argmax(probs.data().subspan(r * classes, classes)) == batch_labels[r]) ++correct;
      }
    }
    const auto total = static_cast<double>(train_set.size());
    history.epoch_train_loss.push_back(loss_sum / total);
    history.epoch_train_accuracy.push_back(static_cast<double>(correct) / total);

    if (!validation_set.empty()) {
      std::vector<TokenSequence> seqs;
      for (const auto& ex : validation_set) seqs.push_back(ex.sequence);
      const auto probs = model.predict_proba(seqs);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto best = static_cast<std::size_t>(
            std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin());
        if (best == validation_set[i].label) ++hits;
      }
      history.epoch_validation_accuracy.push_back(static_cast<double>(hits) /
                                                  static_cast<double>(probs.size()));
    }
  }
  model.history() = history;
  return history;
}

// -- Encoding helpers ----------------------------------------------------------------------

Tokens model_input_tokens(const PatentDocument& doc, PoolKind pool, const FeatureSpec& feature) {
  const bool whole = pool == PoolKind::all_sections || pool == PoolKind::per_section_y ||
                     feature.mode == FeatureSpec::Mode::first_y_per_section;
  if (whole) {
    return select_words(tokenize(doc.title_abstract), tokenize(doc.description),
                        tokenize(doc.claims), feature);
  }
  const Section section = pool == PoolKind::title_abstract ? Section::title_abstract
                          : pool == PoolKind::description  ? Section::description
                                                           : Section::claims;
  return select_words(tokenize(doc.section(section)), feature);
}

std::vector<EncodedExample> encode_examples(std::span<const PatentDocument> docs,
                                            PoolKind pool, const FeatureSpec& feature,
                                            const Vocabulary& vocabulary,
                                            const LabelVocabulary& labels) {
  std::vector<EncodedExample> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    out.push_back({encode(model_input_tokens(d, pool, feature), vocabulary,
                          feature.sequence_length(), d.doc_id),
                   labels.index_of(d.main_label)});
  }
  return out;
}

std::vector<PredictionRanking> rank_documents(const ClassifierModel& model,
                                              std::span<const PatentDocument> docs) {
  const auto& cfg = model.config();
  std::vector<TokenSequence> seqs;
  seqs.reserve(docs.size());
  for (const auto& d : docs) {
    seqs.push_back(encode(model_input_tokens(d, cfg.pool, cfg.feature), model.vocabulary(),
                          cfg.feature.sequence_length(), d.doc_id));
  }
  const auto probs = model.predict_proba(seqs);
  std::vector<PredictionRanking> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) out.push_back(rank_labels(docs[i].doc_id, probs[i]));
  return out;
}

GoldLabels gold_labels(std::span<const PatentDocument> docs, const LabelVocabulary& labels) {
  GoldLabels gold;
  for (const auto& d : docs) gold.emplace(d.doc_id, labels.index_of(d.main_label));
  return gold;
}

}  // namespace pens
