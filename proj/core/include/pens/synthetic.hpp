#pragma once

// Desk-scale stand-in corpus with controllable, per-section label signal.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pens/corpus.hpp"

namespace pens {

struct SyntheticCorpusSpec {
  std::size_t num_docs = 600;
  std::size_t num_labels = 6;
  std::size_t vocabulary_size = 500;  // filler words w0 .. w{n-1}
  double p_signal = 1.0;              // per section, independently
  std::size_t min_filler_words = 10;  // per section, uniform in [min, max]
  std::size_t max_filler_words = 40;
  std::uint64_t seed = 1;

  /// Throws ConfigError listing every problem.
  void validate() const;
};

/// The i-th synthetic label code (A01A, B01A, ..., H01A, A02A, ...).
std::string synthetic_label(std::size_t i);

/// "sigtok_<code>".
std::string signal_token(const IpcSubclass& label);

/// Labels are assigned round-robin then shuffled, so counts differ by at
/// most one. Each section is filler drawn uniformly from the filler
/// vocabulary; with probability p_signal it also carries the label's signal
/// token at a uniformly random position.
std::vector<PatentDocument> generate_synthetic(const SyntheticCorpusSpec& spec);

}  // namespace pens
