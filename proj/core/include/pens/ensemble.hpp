#pragma once

// Three section-specific classifiers whose per-label probabilities are
// averaged into one ranking.

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pens/corpus.hpp"
#include "pens/evaluation.hpp"
#include "pens/models.hpp"

namespace pens {

/// output[c] = (p1[c] + p2[c] + p3[c]) / 3. Throws on a length mismatch.
ProbabilityVector combine(std::span<const double> p1, std::span<const double> p2,
                          std::span<const double> p3);

struct EnsembleMember {
  Section section = Section::title_abstract;  // the text this member reads
  std::shared_ptr<const ClassifierModel> model;
};

class EnsembleModel {
 public:
  /// Throws unless every member has a model and all share one label vocabulary.
  explicit EnsembleModel(std::array<EnsembleMember, 3> members);

  const std::array<EnsembleMember, 3>& members() const { return members_; }
  const LabelVocabulary& labels() const { return members_[0].model->labels(); }

  /// Averaged probabilities, one vector per document, in input order.
  std::vector<ProbabilityVector> predict_proba(std::span<const PatentDocument> docs) const;

  PredictionRanking predict(const PatentDocument& doc) const;
  /// Errors name the offending document.
  std::vector<PredictionRanking> predict_batch(std::span<const PatentDocument> docs) const;

 private:
  std::array<EnsembleMember, 3> members_;
};

/// JSON: {"members": [{"section", "checkpoint", "feature": {"mode", "words"}}, x3]}.
/// Relative checkpoint paths resolve against the manifest's directory.
struct EnsembleManifest {
  struct Entry {
    Section section = Section::title_abstract;
    std::filesystem::path checkpoint;
    FeatureSpec feature;
    bool operator==(const Entry&) const = default;
  };
  std::array<Entry, 3> members;

  bool operator==(const EnsembleManifest&) const = default;
};

std::string ensemble_manifest_to_json(const EnsembleManifest& manifest);
EnsembleManifest ensemble_manifest_from_json(std::string_view text);
void write_ensemble_manifest(const std::filesystem::path& path, const EnsembleManifest& manifest);
EnsembleManifest read_ensemble_manifest(const std::filesystem::path& path);

/// Loads the three checkpoints named by a manifest file. A member's feature
/// spec must match its checkpoint's.
EnsembleModel load_ensemble(const std::filesystem::path& manifest_path);

}  // namespace pens
