#include "pens/synthetic.hpp"

#include <cstdio>

#include "pens/error.hpp"
#include "pens/rng.hpp"

namespace pens {

void SyntheticCorpusSpec::validate() const {
  std::vector<std::string> problems;
  if (num_labels < 2) problems.push_back("num_labels must be >= 2");
  if (num_labels > 8 * 99 * 26) problems.push_back("num_labels must be <= 20592");
  if (num_docs < 1) problems.push_back("num_docs must be >= 1");
  if (vocabulary_size < 1) problems.push_back("vocabulary_size must be >= 1");
  if (!(p_signal >= 0.0 && p_signal <= 1.0)) problems.push_back("p_signal must be in [0, 1]");
  if (min_filler_words < 1) problems.push_back("min_filler_words must be >= 1");
  if (max_filler_words < min_filler_words) {
    problems.push_back("max_filler_words must be >= min_filler_words");
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::string synthetic_label(std::size_t i) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%c%02zu%c", static_cast<char>('A' + i % 8), 1 + (i / 8) % 99,
                static_cast<char>('A' + (i / (8 * 99)) % 26));
  return buf;
}

std::string signal_token(const IpcSubclass& label) { return "sigtok_" + label.code(); }

std::vector<PatentDocument> generate_synthetic(const SyntheticCorpusSpec& spec) {
  spec.validate();
  std::vector<IpcSubclass> labels;
  for (std::size_t i = 0; i < spec.num_labels; ++i) labels.push_back(IpcSubclass::of(synthetic_label(i)));

  std::vector<std::size_t> assignment(spec.num_docs);
  for (std::size_t d = 0; d < spec.num_docs; ++d) assignment[d] = d % spec.num_labels;
  Rng label_rng(derive_seed(spec.seed, "synthetic:labels"));
  shuffle(assignment.begin(), assignment.end(), label_rng);

  Rng rng(derive_seed(spec.seed, "synthetic:text"));
  const auto section_text = [&](const IpcSubclass& label) {
    const std::size_t n =
        spec.min_filler_words + uniform_index(rng, spec.max_filler_words - spec.min_filler_words + 1);
    std::vector<std::string> words;
    words.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) words.push_back("w" + std::to_string(uniform_index(rng, spec.vocabulary_size)));
    if (uniform01(rng) < spec.p_signal) {
      const std::size_t at = uniform_index(rng, n + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), signal_token(label));
    }
    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    return text;
  };

  std::vector<PatentDocument> docs;
  docs.reserve(spec.num_docs);
  const int width = spec.num_docs < 1000000 ? 6 : 12;
  for (std::size_t d = 0; d < spec.num_docs; ++d) {
    const IpcSubclass& label = labels[assignment[d]];
    char id[32];
    std::snprintf(id, sizeof id, "SYN-%0*zu", width, d + 1);
    PatentDocument doc{id, {}, {}, {}, label};
    doc.title_abstract = section_text(label);
    doc.description = section_text(label);
    doc.claims = section_text(label);
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace pens
