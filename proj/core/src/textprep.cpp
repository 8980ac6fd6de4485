#include "pens/textprep.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "pens/error.hpp"

namespace pens {

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    const bool word = (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') ||
                      (u >= 'A' && u <= 'Z') || u >= 0x80;
    if (word) {
      current.push_back((u >= 'A' && u <= 'Z') ? static_cast<char>(u + 32) : ch);
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

// -- FeatureSpec --------------------------------------------------------------------

std::size_t FeatureSpec::sequence_length() const {
  return mode == Mode::first_x ? words : 3 * words;
}

void FeatureSpec::validate() const {
  if (words < 1) throw Error("feature spec: word count must be >= 1");
}

std::string_view mode_name(FeatureSpec::Mode mode) {
  return mode == FeatureSpec::Mode::first_x ? "first_x" : "first_y_per_section";
}

FeatureSpec::Mode parse_mode(std::string_view name) {
  if (name == "first_x") return FeatureSpec::Mode::first_x;
  if (name == "first_y_per_section") return FeatureSpec::Mode::first_y_per_section;
  throw Error("unknown feature mode '" + std::string(name) + "'");
}

namespace {

void append_prefix(Tokens& out, std::span<const std::string> tokens, std::size_t n) {
  const auto take = std::min(n, tokens.size());
  out.insert(out.end(), tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(take));
}

}  // namespace

Tokens select_words(std::span<const std::string> tokens, const FeatureSpec& spec) {
  spec.validate();
  Tokens out;
  append_prefix(out, tokens, spec.words);
  return out;
}

Tokens select_words(std::span<const std::string> title_abstract,
                    std::span<const std::string> description,
                    std::span<const std::string> claims, const FeatureSpec& spec) {
  spec.validate();
  Tokens out;
  if (spec.mode == FeatureSpec::Mode::first_y_per_section) {
    append_prefix(out, title_abstract, spec.words);
    append_prefix(out, description, spec.words);
    append_prefix(out, claims, spec.words);
    return out;
  }
  for (auto part : {title_abstract, description, claims}) {
    if (out.size() >= spec.words) break;
    append_prefix(out, part, spec.words - out.size());
  }
  return out;
}

Tokens select_words(const PoolEntry& entry, const FeatureSpec& spec) {
  if (spec.mode == FeatureSpec::Mode::first_x) {
    if (entry.text.empty() && !entry.sections[0].empty()) {
      const Tokens t = tokenize(entry.sections[0]);
      const Tokens d = tokenize(entry.sections[1]);
      const Tokens c = tokenize(entry.sections[2]);
      return select_words(t, d, c, spec);
    }
    return select_words(tokenize(entry.text), spec);
  }
  if (entry.sections[0].empty() && entry.sections[1].empty() && entry.sections[2].empty()) {
    throw Error("first_y_per_section needs the per-section pool (document " +
                entry.doc_id + ")");
  }
  const Tokens t = tokenize(entry.sections[0]);
  const Tokens d = tokenize(entry.sections[1]);
  const Tokens c = tokenize(entry.sections[2]);
  return select_words(t, d, c, spec);
}

// -- Vocabulary -------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  tokens_ = {std::string(kPadToken), std::string(kUnknownToken)};
  index_.emplace(tokens_[0], kPad);
  index_.emplace(tokens_[1], kUnknown);
}

Vocabulary Vocabulary::build(std::span<const Tokens> train_documents,
                             std::size_t min_count) {
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& doc : train_documents) {
    for (const auto& tok : doc) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= std::max<std::size_t>(min_count, 1) && tok != kPadToken && tok != kUnknownToken) {
      ranked.emplace_back(tok, n);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [tok, n] : ranked) {
    v.index_.emplace(tok, static_cast<std::int32_t>(v.tokens_.size()));
    v.tokens_.push_back(std::move(tok));
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnknownToken) {
    throw FormatError("vocabulary must start with the pad and unknown tokens");
  }
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  for (auto& tok : tokens) {
    const auto idx = static_cast<std::int32_t>(v.tokens_.size());
    if (!v.index_.emplace(tok, idx).second) {
      throw FormatError("vocabulary token '" + tok + "' appears twice");
    }
    v.tokens_.push_back(std::move(tok));
  }
  return v;
}

std::int32_t Vocabulary::index_of(std::string_view token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token(std::int32_t index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw Error("vocabulary index " + std::to_string(index) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(index)];
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(i);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::from_text(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": missing tab");
    }
    std::size_t idx = 0;
    const auto num = line.substr(tab + 1);
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), idx);
    if (ec != std::errc() || ptr != num.data() + num.size() || idx != tokens.size()) {
      throw FormatError("vocabulary line " + std::to_string(line_no) +
                        ": expected index " + std::to_string(tokens.size()));
    }
    tokens.emplace_back(line.substr(0, tab));
  }
  return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_text();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

// -- Encoding ----------------------------------------------------------------------------

TokenSequence encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                     std::size_t target_length, std::string doc_id) {
  if (target_length < 1) throw Error("encode: target length must be >= 1");
  TokenSequence seq;
  seq.doc_id = std::move(doc_id);
  seq.indices.assign(target_length, Vocabulary::kPad);
  seq.true_length = std::min(tokens.size(), target_length);
  for (std::size_t i = 0; i < seq.true_length; ++i) {
    seq.indices[i] = vocab.index_of(tokens[i]);
  }
  return seq;
}

Tokens decode(const TokenSequence& sequence, const Vocabulary& vocab) {
  Tokens out;
  for (std::size_t i = 0; i < sequence.true_length; ++i) {
    out.push_back(vocab.token(sequence.indices[i]));
  }
  return out;
}

}  // namespace pens
