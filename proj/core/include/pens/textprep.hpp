#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pens/corpus.hpp"

namespace pens {

using Tokens = std::vector<std::string>;

/// Lowercases ASCII letters and splits on every maximal run of
/// non-alphanumeric bytes. Bytes >= 0x80 count as alphanumeric so UTF-8
/// words stay whole. No stop words, no stemming.
Tokens tokenize(std::string_view text);

/// Which leading words represent a document.
struct FeatureSpec {
  enum class Mode { first_x, first_y_per_section };

  Mode mode = Mode::first_x;
  std::size_t words = 60;  // X, or Y per section

  /// X for first_x, 3 * Y for first_y_per_section.
  std::size_t sequence_length() const;
  void validate() const;
  bool operator==(const FeatureSpec&) const = default;
};

std::string_view mode_name(FeatureSpec::Mode mode);
FeatureSpec::Mode parse_mode(std::string_view name);

/// First X tokens (fewer if the input is shorter).
Tokens select_words(std::span<const std::string> tokens, const FeatureSpec& spec);

/// first_y_per_section: first Y of each section, concatenated in section
/// order. first_x: first X of the three sections joined.
Tokens select_words(std::span<const std::string> title_abstract,
                    std::span<const std::string> description,
                    std::span<const std::string> claims, const FeatureSpec& spec);

/// Convenience: the selected tokens of a pool entry for a single-text pool
/// (first_x) or a per-section pool (first_y_per_section).
Tokens select_words(const PoolEntry& entry, const FeatureSpec& spec);

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnknown = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnknownToken = "<unk>";

  /// Only the reserved rows.
  Vocabulary();

  /// Counts tokens over training documents only; tokens seen at least
  /// `min_count` times get indices by descending frequency, ties broken by
  /// the token's byte order.
  static Vocabulary build(std::span<const Tokens> train_documents,
                          std::size_t min_count = 1);

  /// Index order is taken from `tokens`, which must start with the reserved
  /// pad and unknown tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::int32_t index_of(std::string_view token) const;
  const std::string& token(std::int32_t index) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// "token<TAB>index" per line, pad and unknown first.
  std::string to_text() const;
  static Vocabulary from_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t, Hash, std::equal_to<>> index_;
};

struct TokenSequence {
  std::string doc_id;
  std::vector<std::int32_t> indices;
  std::size_t true_length = 0;

  bool operator==(const TokenSequence&) const = default;
};

/// Maps tokens to indices (unknown -> 1), truncates to `target_length` and
/// pads the tail with 0.
TokenSequence encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                     std::size_t target_length, std::string doc_id = {});

/// Tokens for the first `true_length` positions.
Tokens decode(const TokenSequence& sequence, const Vocabulary& vocab);

}  // namespace pens
