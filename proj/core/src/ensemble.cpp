#include "pens/ensemble.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pens/error.hpp"

namespace pens {

using json = nlohmann::ordered_json;

ProbabilityVector combine(std::span<const double> p1, std::span<const double> p2,
                          std::span<const double> p3) {
  if (p1.size() != p2.size() || p1.size() != p3.size()) {
    throw ShapeError("combine: probability vectors have lengths " + std::to_string(p1.size()) +
                     ", " + std::to_string(p2.size()) + " and " + std::to_string(p3.size()));
  }
  ProbabilityVector out(p1.size());
  // Extended precision holds 3p exactly, so identical inputs average to p.
  for (std::size_t c = 0; c < out.size(); ++c) {
    const long double total = static_cast<long double>(p1[c]) + p2[c] + p3[c];
    out[c] = static_cast<double>(total / 3.0L);
  }
  return out;
}

namespace {

PoolKind pool_of(Section s) {
  switch (s) {
    case Section::title_abstract: return PoolKind::title_abstract;
    case Section::description: return PoolKind::description;
    case Section::claims: return PoolKind::claims;
  }
  return PoolKind::title_abstract;
}

}  // namespace

EnsembleModel::EnsembleModel(std::array<EnsembleMember, 3> members) : members_(std::move(members)) {
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const auto& m = members_[i];
    if (!m.model) throw Error("ensemble member " + std::to_string(i + 1) + " has no model");
    if (m.model->config().feature.mode != FeatureSpec::Mode::first_x) {
      throw Error("ensemble member " + std::to_string(i + 1) +
                  " must read a single section (first_x features)");
    }
    if (!(m.model->labels() == members_[0].model->labels())) {
      throw Error("ensemble member " + std::to_string(i + 1) +
                  " has a different label vocabulary from member 1");
    }
  }
}

std::vector<ProbabilityVector> EnsembleModel::predict_proba(
    std::span<const PatentDocument> docs) const {
  for (const auto& doc : docs) {
    for (const auto& m : members_) {
      if (doc.section(m.section).empty()) {
        throw Error("document '" + doc.doc_id + "': missing " +
                    std::string(section_name(m.section)) + " section");
      }
    }
  }
  std::array<std::vector<ProbabilityVector>, 3> outputs;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const auto& model = *members_[i].model;
    const auto& feature = model.config().feature;
    std::vector<TokenSequence> seqs;
    seqs.reserve(docs.size());
    for (const auto& doc : docs) {
      seqs.push_back(encode(model_input_tokens(doc, pool_of(members_[i].section), feature),
                            model.vocabulary(), feature.sequence_length(), doc.doc_id));
    }
    outputs[i] = model.predict_proba(seqs);
  }
  std::vector<ProbabilityVector> out;
  out.reserve(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    out.push_back(combine(outputs[0][d], outputs[1][d], outputs[2][d]));
  }
  return out;
}

PredictionRanking EnsembleModel::predict(const PatentDocument& doc) const {
  return predict_batch(std::span<const PatentDocument>(&doc, 1)).front();
}

std::vector<PredictionRanking> EnsembleModel::predict_batch(
    std::span<const PatentDocument> docs) const {
  const auto probs = predict_proba(docs);
  std::vector<PredictionRanking> out;
  out.reserve(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) out.push_back(rank_labels(docs[d].doc_id, probs[d]));
  return out;
}

// -- Manifest --------------------------------------------------------------------------

std::string ensemble_manifest_to_json(const EnsembleManifest& manifest) {
  json members = json::array();
  for (const auto& e : manifest.members) {
    members.push_back({{"section", section_name(e.section)},
                       {"checkpoint", e.checkpoint.generic_string()},
                       {"feature", {{"mode", mode_name(e.feature.mode)}, {"words", e.feature.words}}}});
  }
  return json{{"members", members}}.dump(2) + "\n";
}

EnsembleManifest ensemble_manifest_from_json(std::string_view text) {
  EnsembleManifest manifest;
  try {
    const json j = json::parse(text);
    const auto& members = j.at("members");
    if (!members.is_array() || members.size() != 3) {
      throw FormatError("ensemble manifest must list exactly three members");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& m = members[i];
      auto& e = manifest.members[i];
      e.section = parse_section(m.at("section").get<std::string>());
      e.checkpoint = m.at("checkpoint").get<std::string>();
      e.feature.mode = parse_mode(m.at("feature").at("mode").get<std::string>());
      e.feature.words = m.at("feature").at("words").get<std::size_t>();
      e.feature.validate();
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid ensemble manifest: ") + e.what());
  }
  return manifest;
}

void write_ensemble_manifest(const std::filesystem::path& path, const EnsembleManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << ensemble_manifest_to_json(manifest);
}

EnsembleManifest read_ensemble_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read ensemble manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ensemble_manifest_from_json(buf.str());
}

EnsembleModel load_ensemble(const std::filesystem::path& manifest_path) {
  const EnsembleManifest manifest = read_ensemble_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::array<EnsembleMember, 3> members;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& e = manifest.members[i];
    const auto path = e.checkpoint.is_absolute() ? e.checkpoint : base / e.checkpoint;
    auto model = std::make_shared<const ClassifierModel>(load_checkpoint(path));
    if (!(model->config().feature == e.feature)) {
      throw Error("ensemble member " + std::to_string(i + 1) + ": manifest feature spec does not match " +
                  path.string());
    }
    members[i] = {e.section, std::move(model)};
  }
  return EnsembleModel(std::move(members));
}

}  // namespace pens
