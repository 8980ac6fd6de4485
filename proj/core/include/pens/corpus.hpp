#pragma once

// Patent corpus ingestion: parsing (XML subset or JSONL), admission
// filtering, section pools, train/validation/test splits and per-section word
// statistics.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pens {

/// A 4-character IPC sub-class code such as "G06F": section letter A-H, two
/// digit class, sub-class letter.
class IpcSubclass {
 public:
  /// Accepts a full code and keeps its first four characters after trimming
  /// leading whitespace ("G06F 17/30" -> "G06F"). Returns nullopt when those
  /// characters are not a valid sub-class.
  static std::optional<IpcSubclass> parse(std::string_view code);
  /// Strict variant; throws Error on invalid input.
  static IpcSubclass of(std::string_view code);

  const std::string& code() const { return code_; }
  auto operator<=>(const IpcSubclass&) const = default;

 private:
  explicit IpcSubclass(std::string code) : code_(std::move(code)) {}
  std::string code_;
};

enum class Section { title_abstract, description, claims };
inline constexpr std::array<Section, 3> kSections = {
    Section::title_abstract, Section::description, Section::claims};
std::string_view section_name(Section s);
Section parse_section(std::string_view name);

/// A parsed document before admission. `main_classification` is empty when
/// the source had no main-classification tag (an unlabeled record).
struct RawRecord {
  std::string doc_id;
  std::string title_abstract;
  std::string description;
  std::string claims;
  std::optional<std::string> main_classification;

  bool labeled() const { return main_classification.has_value(); }
  bool operator==(const RawRecord&) const = default;
};

struct PatentDocument {
  std::string doc_id;
  std::string title_abstract;
  std::string description;
  std::string claims;
  IpcSubclass main_label;

  const std::string& section(Section s) const;
  RawRecord to_record() const;
  bool operator==(const PatentDocument&) const = default;
};

enum class InputFormat { xml, jsonl };
InputFormat parse_input_format(std::string_view name);

/// Parses a corpus file. Malformed containers throw ParseError carrying the
/// byte offset; unknown tags and keys are ignored.
std::vector<RawRecord> parse_corpus(const std::filesystem::path& path,
                                    InputFormat format);
std::vector<RawRecord> parse_xml(std::string_view content);
std::vector<RawRecord> parse_jsonl(std::string_view content);

/// Keeps records with a parseable main classification and three non-empty
/// sections, in input order.
std::vector<PatentDocument> filter_admitted(std::span<const RawRecord> records);

std::string to_jsonl(std::span<const PatentDocument> docs);
void write_jsonl(const std::filesystem::path& path,
                 std::span<const PatentDocument> docs);
/// Reads a JSONL corpus and admits it (throws if any line is inadmissible).
std::vector<PatentDocument> read_documents(const std::filesystem::path& path);

// -- Pools -----------------------------------------------------------------

enum class PoolKind { all_sections, title_abstract, description, claims, per_section_y };
inline constexpr std::array<PoolKind, 5> kPoolKinds = {
    PoolKind::all_sections, PoolKind::title_abstract, PoolKind::description,
    PoolKind::claims, PoolKind::per_section_y};
std::string_view pool_name(PoolKind kind);
PoolKind parse_pool_kind(std::string_view name);

struct PoolEntry {
  std::string doc_id;
  IpcSubclass label;
  std::string text;                     // single-text pools
  std::array<std::string, 3> sections;  // per_section_y only

  bool operator==(const PoolEntry&) const = default;
};

struct SectionPool {
  PoolKind kind;
  std::vector<PoolEntry> documents;

  bool operator==(const SectionPool&) const = default;
};

/// Text of `doc` as seen by a single-text pool. all_sections joins the three
/// sections with single spaces.
std::string pool_text(const PatentDocument& doc, PoolKind kind);

std::map<PoolKind, SectionPool> build_pools(std::span<const PatentDocument> docs);

/// One JSON object per line: doc_id, main_label, pool and either text or the
/// three section keys (per_section_y).
std::string pool_to_jsonl(const SectionPool& pool);
SectionPool pool_from_jsonl(std::string_view content);

// -- Splits ----------------------------------------------------------------

struct SplitManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;

  bool operator==(const SplitManifest&) const = default;
};

/// Fisher-Yates shuffle of the document order under `seed`, then an
/// 80/10/10 cut: |train| = round(0.8 N), |validation| = round(0.1 N), test
/// gets the rest. Throws Error for N < 10 or duplicate ids.
SplitManifest split(std::span<const PatentDocument> docs, std::uint64_t seed);

std::string manifest_to_json(const SplitManifest& manifest);
SplitManifest manifest_from_json(std::string_view content);
void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest read_manifest(const std::filesystem::path& path);

/// Documents partitioned by a manifest, each part in manifest order.
struct SplitDocuments {
  std::vector<PatentDocument> train;
  std::vector<PatentDocument> validation;
  std::vector<PatentDocument> test;
};
SplitDocuments apply_split(std::span<const PatentDocument> docs,
                           const SplitManifest& manifest);

// -- Statistics --------------------------------------------------------------

struct WordCountStats {
  std::size_t min_words = 0;
  std::size_t max_words = 0;
  std::size_t total_words = 0;
  std::size_t documents = 0;

  double mean_words() const;
};

struct SectionStats {
  std::array<WordCountStats, 3> sections;  // indexed by Section

  const WordCountStats& operator[](Section s) const {
    return sections[static_cast<std::size_t>(s)];
  }
};

SectionStats section_stats(std::span<const PatentDocument> docs);

/// Header "section,min,max,mean", one row per section, mean to 2 decimals.
std::string stats_to_csv(const SectionStats& stats);

}  // namespace pens
