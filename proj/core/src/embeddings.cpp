#include "pens/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "pens/error.hpp"
#include "pens/rng.hpp"

namespace pens {

// -- EmbeddingTable -------------------------------------------------------------------

EmbeddingTable::EmbeddingTable(std::size_t dim, Source source) : dim_(dim), source_(source) {
  if (dim_ < 1) throw Error("embedding dimension must be >= 1");
}

void EmbeddingTable::set(const std::string& token, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw FormatError("embedding for '" + token + "' has " + std::to_string(vector.size()) +
                      " components, expected " + std::to_string(dim_));
  }
  for (float v : vector) {
    if (!std::isfinite(v)) throw FormatError("embedding for '" + token + "' is not finite");
  }
  if (const auto it = rows_.find(token); it != rows_.end()) {
    std::copy(vector.begin(), vector.end(), values_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    return;
  }
  rows_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  values_.insert(values_.end(), vector.begin(), vector.end());
}

bool EmbeddingTable::contains(std::string_view token) const {
  return rows_.find(std::string(token)) != rows_.end();
}

std::span<const float> EmbeddingTable::find(std::string_view token) const {
  const auto it = rows_.find(std::string(token));
  if (it == rows_.end()) return {};
  return {values_.data() + it->second * dim_, dim_};
}

std::string EmbeddingTable::to_text() const {
  std::string out = std::to_string(tokens_.size()) + " " + std::to_string(dim_) + "\n";
  char buf[32];
  for (std::size_t r = 0; r < tokens_.size(); ++r) {
    out += tokens_[r];
    for (std::size_t d = 0; d < dim_; ++d) {
      const auto res = std::to_chars(buf, buf + sizeof buf, values_[r * dim_ + d]);
      out += ' ';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_text();
}

// -- Loading ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_size(std::string_view s, std::size_t& out) {
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

EmbeddingTable parse_word_vectors(std::string_view text) {
  std::size_t dim = 0;
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  std::size_t line_no = 0;
  bool first_content = true;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto fields = split_spaces(line);
    if (fields.empty()) continue;
    std::size_t a = 0, b = 0;
    if (first_content && fields.size() == 2 && parse_size(fields[0], a) && parse_size(fields[1], b)) {
      first_content = false;
      continue;  // "count dim" header
    }
    first_content = false;
    const std::string where = "word vectors line " + std::to_string(line_no);
    if (fields.size() < 2) throw FormatError(where + ": token without components");
    const std::size_t n = fields.size() - 1;
    if (dim == 0) dim = n;
    if (n != dim) {
      throw FormatError(where + ": " + std::to_string(n) + " components, expected " +
                        std::to_string(dim));
    }
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto f = fields[i + 1];
      const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v[i]);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(v[i])) {
        throw FormatError(where + ": non-numeric component '" + std::string(f) + "'");
      }
    }
    rows.emplace_back(std::string(fields[0]), std::move(v));
  }
  if (dim == 0) throw FormatError("word vectors: no vectors found");
  EmbeddingTable table(dim, EmbeddingTable::Source::pretrained_file);
  for (const auto& [tok, v] : rows) table.set(tok, v);
  return table;
}

EmbeddingTable load_pretrained(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_word_vectors(ss.str());
}

// -- Skip-gram -------------------------------------------------------------------------

void SkipGramConfig::validate() const {
  std::vector<std::string> problems;
  if (dim < 1) problems.push_back("skipgram dim must be >= 1");
  if (window < 1) problems.push_back("skipgram window must be >= 1");
  if (epochs < 1) problems.push_back("skipgram epochs must be >= 1");
  if (!(learning_rate > 0)) problems.push_back("skipgram learning rate must be > 0");
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

namespace {

double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

SkipGramResult train_skipgram(std::span<const Tokens> documents,
                              const SkipGramConfig& config) {
  config.validate();

  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& doc : documents) {
    for (const auto& tok : doc) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> words;
  for (const auto& [tok, n] : counts) {
    if (n >= config.min_count) words.emplace_back(tok, n);
  }
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (words.empty()) throw Error("skip-gram: empty token stream");

  std::unordered_map<std::string_view, std::uint32_t> index;
  for (std::size_t i = 0; i < words.size(); ++i) {
    index.emplace(words[i].first, static_cast<std::uint32_t>(i));
  }
  std::vector<std::vector<std::uint32_t>> corpus;
  std::size_t total_words = 0;
  for (const auto& doc : documents) {
    std::vector<std::uint32_t> ids;
    for (const auto& tok : doc) {
      if (const auto it = index.find(tok); it != index.end()) ids.push_back(it->second);
    }
    total_words += ids.size();
    corpus.push_back(std::move(ids));
  }

  // Noise distribution: cumulative unigram^0.75.
  std::vector<double> cumulative(words.size());
  double acc = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    acc += std::pow(static_cast<double>(words[i].second), 0.75);
    cumulative[i] = acc;
  }
  Rng rng(config.seed);
  const auto draw_negative = [&]() {
    const double u = uniform01(rng) * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<std::uint32_t>(std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative.begin()), words.size() - 1));
  };

  const std::size_t dim = config.dim;
  const std::size_t vocab = words.size();
  std::vector<float> input(vocab * dim);
  std::vector<float> output(vocab * dim, 0.0f);
  const double bound = 0.5 / static_cast<double>(dim);
  for (auto& v : input) v = static_cast<float>(uniform(rng, -bound, bound));

  std::vector<double> epoch_loss;
  std::vector<float> grad_center(dim);
  const double total_steps = static_cast<double>(config.epochs * total_words);
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0;
    std::size_t pairs = 0;
    for (const auto& ids : corpus) {
      for (std::size_t pos = 0; pos < ids.size(); ++pos, ++processed) {
        const double progress = total_steps > 0 ? static_cast<double>(processed) / total_steps : 0.0;
        const double lr = std::max(config.min_learning_rate,
                                   config.learning_rate -
                                       (config.learning_rate - config.min_learning_rate) * progress);
        const std::size_t reach = 1 + uniform_index(rng, config.window);
        const std::size_t lo = pos >= reach ? pos - reach : 0;
        const std::size_t hi = std::min(ids.size() - 1, pos + reach);
        float* center = input.data() + ids[pos] * dim;
        for (std::size_t ctx = lo; ctx <= hi; ++ctx) {
          if (ctx == pos) continue;
          const std::uint32_t context = ids[ctx];
          std::fill(grad_center.begin(), grad_center.end(), 0.0f);
          for (std::size_t k = 0; k <= config.negative_samples; ++k) {
            std::uint32_t target = context;
            double label = 1.0;
            if (k > 0) {
              target = draw_negative();
              if (target == context) continue;
              label = 0.0;
            }
            float* out = output.data() + target * dim;
            double dot = 0;
            for (std::size_t d = 0; d < dim; ++d) dot += static_cast<double>(center[d]) * out[d];
            loss -= label > 0 ? log_sigmoid(dot) : log_sigmoid(-dot);
            const auto g = static_cast<float>((label - sigmoid(dot)) * lr);
            for (std::size_t d = 0; d < dim; ++d) {
              grad_center[d] += g * out[d];
              out[d] += g * center[d];
            }
          }
          for (std::size_t d = 0; d < dim; ++d) center[d] += grad_center[d];
          ++pairs;
        }
      }
    }
    epoch_loss.push_back(pairs == 0 ? 0.0 : loss / static_cast<double>(pairs));
  }

  EmbeddingTable table(dim, EmbeddingTable::Source::skipgram_trained);
  for (std::size_t i = 0; i < vocab; ++i) {
    table.set(words[i].first, std::span<const float>(input.data() + i * dim, dim));
  }
  return {std::move(table), std::move(epoch_loss)};
}

// -- Matrix assembly ----------------------------------------------------------------------

EmbeddingMatrix assemble_matrix(const Vocabulary& vocab, const EmbeddingTable& table,
                                std::uint64_t seed) {
  EmbeddingMatrix m;
  m.rows = vocab.size();
  m.dim = table.dim();
  m.values.assign(m.rows * m.dim, 0.0f);
  Rng rng(seed);
  std::vector<float> unknown(m.dim);
  for (auto& v : unknown) v = static_cast<float>(uniform(rng, -0.05, 0.05));
  for (std::size_t r = 1; r < m.rows; ++r) {
    auto src = table.find(vocab.token(static_cast<std::int32_t>(r)));
    if (r == static_cast<std::size_t>(Vocabulary::kUnknown) || src.empty()) src = unknown;
    std::copy(src.begin(), src.end(), m.values.begin() + static_cast<std::ptrdiff_t>(r * m.dim));
  }
  return m;
}

EmbeddingMatrix random_matrix(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  EmbeddingMatrix m;
  m.rows = vocab.size();
  m.dim = dim;
  m.values.assign(m.rows * m.dim, 0.0f);
  m.trainable = true;
  Rng rng(seed);
  for (std::size_t i = m.dim; i < m.values.size(); ++i) {
    m.values[i] = static_cast<float>(uniform(rng, -0.05, 0.05));
  }
  return m;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace pens
