#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pens/textprep.hpp"

namespace pens {

/// Token -> vector map with a fixed dimension. Insertion order is kept so
/// saving is deterministic.
class EmbeddingTable {
 public:
  enum class Source { pretrained_file, skipgram_trained };

  EmbeddingTable(std::size_t dim, Source source);

  std::size_t dim() const { return dim_; }
  Source source() const { return source_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Replaces an existing entry. Throws when the length differs from dim()
  /// or an entry is not finite.
  void set(const std::string& token, std::span<const float> vector);
  bool contains(std::string_view token) const;
  /// Empty span when absent.
  std::span<const float> find(std::string_view token) const;

  /// Word-vector text format with a "count dim" header; components are
  /// written in shortest round-trip form.
  void save(const std::filesystem::path& path) const;
  std::string to_text() const;

 private:
  std::size_t dim_;
  Source source_;
  std::vector<std::string> tokens_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> rows_;
};

/// Reads "token v1 ... vdim" lines, skipping an optional "count dim" header.
/// The dimension comes from the first vector line; later lines must match.
EmbeddingTable load_pretrained(const std::filesystem::path& path);
EmbeddingTable parse_word_vectors(std::string_view text);

struct SkipGramConfig {
  std::size_t dim = 300;
  std::size_t window = 8;
  std::size_t epochs = 20;
  std::size_t negative_samples = 5;
  double learning_rate = 0.025;
  double min_learning_rate = 0.0001;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SkipGramResult {
  EmbeddingTable table;
  /// Mean negative-sampling loss per (centre, context) pair, one per epoch.
  std::vector<double> epoch_loss;
};

/// Skip-gram with negative sampling. For each centre word, contexts come
/// from a window shrunk uniformly at random to [1, window]; each pair
/// maximises log s(u_o . v_c) + sum_k log s(-u_k . v_c) with negatives drawn
/// from unigram counts raised to 0.75. Input vectors start uniform in
/// [-0.5/dim, 0.5/dim], output vectors at zero; the learning rate decays
/// linearly to min_learning_rate over all training pairs. Single-threaded
/// and deterministic under config.seed.
SkipGramResult train_skipgram(std::span<const Tokens> documents,
                              const SkipGramConfig& config);

/// Vocabulary-aligned matrix: rows = vocab.size(), row-major [rows, dim].
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;
  bool trainable = false;

  std::span<const float> row(std::size_t r) const {
    return {values.data() + r * dim, dim};
  }
};

/// Row i is table[vocab.token(i)] when present; every other row (including
/// <unk>) copies one unknown vector drawn uniform in [-0.05, 0.05] under
/// `seed`. Row 0 (padding) is zero.
EmbeddingMatrix assemble_matrix(const Vocabulary& vocab, const EmbeddingTable& table,
                                std::uint64_t seed);

/// No pretrained table: every non-pad row drawn uniform in [-0.05, 0.05].
EmbeddingMatrix random_matrix(const Vocabulary& vocab, std::size_t dim,
                              std::uint64_t seed);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace pens
