#include "pens/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "pens/error.hpp"
#include "pens/rng.hpp"
#include "pens/textprep.hpp"
#include "xml_reader.hpp"

namespace pens {

using json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::string join_nonempty(std::string_view a, std::string_view b) {
  if (a.empty()) return std::string(b);
  if (b.empty()) return std::string(a);
  return std::string(a) + " " + std::string(b);
}

}  // namespace

// -- IpcSubclass ---------------------------------------------------------------------

std::optional<IpcSubclass> IpcSubclass::parse(std::string_view code) {
  code = trim(code);
  if (code.size() < 4) return std::nullopt;
  const std::string head(code.substr(0, 4));
  const auto up = [](char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); };
  std::string norm{up(head[0]), head[1], head[2], up(head[3])};
  const bool ok = norm[0] >= 'A' && norm[0] <= 'H' &&
                  std::isdigit(static_cast<unsigned char>(norm[1])) &&
                  std::isdigit(static_cast<unsigned char>(norm[2])) && norm[3] >= 'A' &&
                  norm[3] <= 'Z';
  if (!ok) return std::nullopt;
  return IpcSubclass(std::move(norm));
}

IpcSubclass IpcSubclass::of(std::string_view code) {
  auto parsed = parse(code);
  if (!parsed) throw Error("invalid IPC sub-class '" + std::string(code) + "'");
  return *parsed;
}

std::string_view section_name(Section s) {
  switch (s) {
    case Section::title_abstract: return "title_abstract";
    case Section::description: return "description";
    case Section::claims: return "claims";
  }
  return "?";
}

Section parse_section(std::string_view name) {
  for (Section s : kSections) {
    if (section_name(s) == name) return s;
  }
  throw Error("unknown section '" + std::string(name) + "'");
}

const std::string& PatentDocument::section(Section s) const {
  switch (s) {
    case Section::title_abstract: return title_abstract;
    case Section::description: return description;
    case Section::claims: return claims;
  }
  return claims;
}

RawRecord PatentDocument::to_record() const {
  return {doc_id, title_abstract, description, claims, main_label.code()};
}

InputFormat parse_input_format(std::string_view name) {
  if (name == "xml") return InputFormat::xml;
  if (name == "jsonl") return InputFormat::jsonl;
  throw Error("unknown input format '" + std::string(name) + "' (expected xml or jsonl)");
}

// -- XML -------------------------------------------------------------------------------

namespace {

// Collects the recognised section tags of each <patent-document>. Text inside
// nested markup is kept; element boundaries inside a section read as a space.
class PatentHandler final : public xml::Handler {
 public:
  std::vector<RawRecord> records;

  void start_element(std::string_view name, const xml::Attributes& attrs,
                     std::size_t offset) override {
    if (name == "patent-document") {
      if (in_doc_) throw ParseError("xml: nested <patent-document>", offset);
      in_doc_ = true;
      current_ = {};
      title_.clear();
      abstract_.clear();
      description_.clear();
      claims_.clear();
      label_.reset();
      for (const auto& [k, v] : attrs) {
        if (k == "ucid") current_.doc_id = v;
      }
      return;
    }
    if (!in_doc_) return;
    if (target_ == nullptr) {
      if (name == "invention-title") begin(&title_, name);
      else if (name == "abstract") begin(&abstract_, name);
      else if (name == "description") begin(&description_, name);
      else if (name == "claims") begin(&claims_, name);
      else if (name == "main-classification") begin(&label_buffer_, name);
    } else {
      boundary();
    }
    ++nesting_;
  }

  void end_element(std::string_view name, std::size_t offset) override {
    if (name == "patent-document") {
      finish(offset);
      return;
    }
    if (!in_doc_) return;
    --nesting_;
    if (target_ != nullptr && name == target_tag_ && depth_of_target_ == nesting_) {
      const std::string value(trim(section_));
      if (target_ == &label_buffer_) {
        if (!label_) label_ = value;
      } else {
        if (!target_->empty() && !value.empty()) *target_ += ' ';
        *target_ += value;
      }
      target_ = nullptr;
      return;
    }
    if (target_ != nullptr) boundary();
  }

  void text(std::string_view decoded, std::size_t) override {
    if (target_ == nullptr || decoded.empty()) return;
    if (pending_space_ && !std::isspace(static_cast<unsigned char>(decoded.front()))) section_ += ' ';
    pending_space_ = false;
    section_ += decoded;
  }

 private:
  void begin(std::string* target, std::string_view tag) {
    target_ = target;
    target_tag_ = std::string(tag);
    depth_of_target_ = nesting_;
    section_.clear();
    pending_space_ = false;
  }

  void boundary() {
    pending_space_ = !section_.empty() && !std::isspace(static_cast<unsigned char>(section_.back()));
  }

  void finish(std::size_t offset) {
    if (current_.doc_id.empty()) {
      throw ParseError("xml: <patent-document> without ucid attribute", offset);
    }
    current_.title_abstract = join_nonempty(title_, abstract_);
    current_.description = description_;
    current_.claims = claims_;
    current_.main_classification = label_;
    records.push_back(std::move(current_));
    in_doc_ = false;
    nesting_ = 0;
  }

  bool in_doc_ = false;
  RawRecord current_;
  std::string title_, abstract_, description_, claims_, label_buffer_;
  std::optional<std::string> label_;
  std::string* target_ = nullptr;
  std::string target_tag_;
  std::string section_;
  std::size_t depth_of_target_ = 0;
  std::size_t nesting_ = 0;
  bool pending_space_ = false;
};

}  // namespace

std::vector<RawRecord> parse_xml(std::string_view content) {
  PatentHandler handler;
  xml::parse(content, handler);
  return std::move(handler.records);
}

// -- JSONL -------------------------------------------------------------------------------

namespace {

std::string string_field(const json& obj, const char* key, std::size_t offset,
                         bool required) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) throw ParseError(std::string("jsonl: missing key ") + key, offset);
    return {};
  }
  if (!it->is_string()) {
    throw ParseError(std::string("jsonl: key ") + key + " must be a string", offset);
  }
  return it->get<std::string>();
}

// Calls fn(line, offset_of_line_start) for every non-blank line.
template <typename Fn>
void for_each_line(std::string_view content, Fn fn) {
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const auto line = content.substr(start, end - start);
    if (!trim(line).empty()) fn(line, start);
    start = end + 1;
  }
}

json parse_json_line(std::string_view line, std::size_t offset) {
  try {
    json obj = json::parse(line);
    if (!obj.is_object()) throw ParseError("jsonl: line is not an object", offset);
    return obj;
  } catch (const json::parse_error& e) {
    const std::size_t within = e.byte > 0 ? e.byte - 1 : 0;
    throw ParseError(std::string("jsonl: ") + e.what(), offset + within);
  }
}

}  // namespace

std::vector<RawRecord> parse_jsonl(std::string_view content) {
  std::vector<RawRecord> out;
  for_each_line(content, [&](std::string_view line, std::size_t offset) {
    const json obj = parse_json_line(line, offset);
    RawRecord r;
    r.doc_id = string_field(obj, "doc_id", offset, true);
    r.title_abstract = string_field(obj, "title_abstract", offset, false);
    r.description = string_field(obj, "description", offset, false);
    r.claims = string_field(obj, "claims", offset, false);
    if (const auto it = obj.find("main_label"); it != obj.end() && !it->is_null()) {
      r.main_classification = string_field(obj, "main_label", offset, true);
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<RawRecord> parse_corpus(const std::filesystem::path& path,
                                    InputFormat format) {
  const std::string content = read_file(path);
  return format == InputFormat::xml ? parse_xml(content) : parse_jsonl(content);
}

std::vector<PatentDocument> filter_admitted(std::span<const RawRecord> records) {
  std::vector<PatentDocument> out;
  for (const auto& r : records) {
    if (!r.main_classification) continue;
    auto label = IpcSubclass::parse(*r.main_classification);
    if (!label) continue;
    if (r.title_abstract.empty() || r.description.empty() || r.claims.empty()) continue;
    out.push_back({r.doc_id, r.title_abstract, r.description, r.claims, *label});
  }
  return out;
}

std::string to_jsonl(std::span<const PatentDocument> docs) {
  std::string out;
  for (const auto& d : docs) {
    json obj;
    obj["doc_id"] = d.doc_id;
    obj["title_abstract"] = d.title_abstract;
    obj["description"] = d.description;
    obj["claims"] = d.claims;
    obj["main_label"] = d.main_label.code();
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, std::span<const PatentDocument> docs) {
  write_file(path, to_jsonl(docs));
}

std::vector<PatentDocument> read_documents(const std::filesystem::path& path) {
  const auto records = parse_corpus(path, InputFormat::jsonl);
  auto docs = filter_admitted(records);
  if (docs.size() != records.size()) {
    throw Error(path.string() + ": " + std::to_string(records.size() - docs.size()) +
                " record(s) are not admissible (missing label or empty section)");
  }
  return docs;
}

// -- Pools --------------------------------------------------------------------------------

std::string_view pool_name(PoolKind kind) {
  switch (kind) {
    case PoolKind::all_sections: return "all_sections";
    case PoolKind::title_abstract: return "title_abstract";
    case PoolKind::description: return "description";
    case PoolKind::claims: return "claims";
    case PoolKind::per_section_y: return "per_section_y";
  }
  return "?";
}

PoolKind parse_pool_kind(std::string_view name) {
  for (PoolKind k : kPoolKinds) {
    if (pool_name(k) == name) return k;
  }
  throw Error("unknown pool kind '" + std::string(name) + "'");
}

std::string pool_text(const PatentDocument& doc, PoolKind kind) {
  switch (kind) {
    case PoolKind::all_sections:
      return doc.title_abstract + " " + doc.description + " " + doc.claims;
    case PoolKind::title_abstract: return doc.title_abstract;
    case PoolKind::description: return doc.description;
    case PoolKind::claims: return doc.claims;
    case PoolKind::per_section_y: break;
  }
  throw Error("per_section_y has no single text");
}

std::map<PoolKind, SectionPool> build_pools(std::span<const PatentDocument> docs) {
  std::map<PoolKind, SectionPool> pools;
  for (PoolKind kind : kPoolKinds) {
    SectionPool pool{kind, {}};
    pool.documents.reserve(docs.size());
    for (const auto& d : docs) {
      PoolEntry e{d.doc_id, d.main_label, {}, {}};
      if (kind == PoolKind::per_section_y) {
        e.sections = {d.title_abstract, d.description, d.claims};
      } else {
        e.text = pool_text(d, kind);
      }
      pool.documents.push_back(std::move(e));
    }
    pools.emplace(kind, std::move(pool));
  }
  return pools;
}

std::string pool_to_jsonl(const SectionPool& pool) {
  std::string out;
  for (const auto& e : pool.documents) {
    json obj;
    obj["doc_id"] = e.doc_id;
    obj["main_label"] = e.label.code();
    obj["pool"] = std::string(pool_name(pool.kind));
    if (pool.kind == PoolKind::per_section_y) {
      obj["title_abstract"] = e.sections[0];
      obj["description"] = e.sections[1];
      obj["claims"] = e.sections[2];
    } else {
      obj["text"] = e.text;
    }
    out += obj.dump();
    out += '\n';
  }
  return out;
}

SectionPool pool_from_jsonl(std::string_view content) {
  SectionPool pool{PoolKind::all_sections, {}};
  bool first = true;
  for_each_line(content, [&](std::string_view line, std::size_t offset) {
    const json obj = parse_json_line(line, offset);
    const auto kind = parse_pool_kind(string_field(obj, "pool", offset, true));
    if (first) {
      pool.kind = kind;
      first = false;
    } else if (kind != pool.kind) {
      throw ParseError("pool: mixed pool kinds", offset);
    }
    auto label = IpcSubclass::parse(string_field(obj, "main_label", offset, true));
    if (!label) throw ParseError("pool: invalid main_label", offset);
    PoolEntry e{string_field(obj, "doc_id", offset, true), *label, {}, {}};
    if (kind == PoolKind::per_section_y) {
      e.sections = {string_field(obj, "title_abstract", offset, true),
                    string_field(obj, "description", offset, true),
                    string_field(obj, "claims", offset, true)};
    } else {
      e.text = string_field(obj, "text", offset, true);
    }
    pool.documents.push_back(std::move(e));
  });
  return pool;
}

// -- Splits ---------------------------------------------------------------------------------

SplitManifest split(std::span<const PatentDocument> docs, std::uint64_t seed) {
  const std::size_t n = docs.size();
  if (n < 10) throw Error("too few documents to split");
  std::unordered_set<std::string_view> ids;
  for (const auto& d : docs) {
    if (!ids.insert(d.doc_id).second) throw Error("duplicate doc_id '" + d.doc_id + "'");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order.begin(), order.end(), rng);

  // round-half-up of 0.8 N and 0.1 N in integer arithmetic
  const std::size_t n_train = (8 * n + 5) / 10;
  const std::size_t n_val = (n + 5) / 10;
  SplitManifest m;
  m.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = docs[order[i]].doc_id;
    if (i < n_train) m.train.push_back(id);
    else if (i < n_train + n_val) m.validation.push_back(id);
    else m.test.push_back(id);
  }
  return m;
}

std::string manifest_to_json(const SplitManifest& m) {
  json obj;
  obj["seed"] = m.seed;
  obj["train"] = m.train;
  obj["validation"] = m.validation;
  obj["test"] = m.test;
  return obj.dump(2) + "\n";
}

SplitManifest manifest_from_json(std::string_view content) {
  try {
    const json obj = json::parse(content);
    SplitManifest m;
    m.seed = obj.at("seed").get<std::uint64_t>();
    m.train = obj.at("train").get<std::vector<std::string>>();
    m.validation = obj.at("validation").get<std::vector<std::string>>();
    m.test = obj.at("test").get<std::vector<std::string>>();
    return m;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("split manifest: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  } catch (const json::exception& e) {
    throw FormatError(std::string("split manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest) {
  write_file(path, manifest_to_json(manifest));
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_file(path));
}

SplitDocuments apply_split(std::span<const PatentDocument> docs,
                           const SplitManifest& manifest) {
  std::unordered_map<std::string_view, const PatentDocument*> by_id;
  for (const auto& d : docs) by_id.emplace(d.doc_id, &d);
  const auto pick = [&](const std::vector<std::string>& ids) {
    std::vector<PatentDocument> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw Error("split manifest names unknown document '" + id + "'");
      out.push_back(*it->second);
    }
    return out;
  };
  return {pick(manifest.train), pick(manifest.validation), pick(manifest.test)};
}

// -- Statistics -------------------------------------------------------------------------------

double WordCountStats::mean_words() const {
  return documents == 0 ? 0.0
                        : static_cast<double>(total_words) / static_cast<double>(documents);
}

SectionStats section_stats(std::span<const PatentDocument> docs) {
  SectionStats stats;
  for (Section s : kSections) {
    auto& row = stats.sections[static_cast<std::size_t>(s)];
    for (const auto& d : docs) {
      const std::size_t n = tokenize(d.section(s)).size();
      row.min_words = row.documents == 0 ? n : std::min(row.min_words, n);
      row.max_words = std::max(row.max_words, n);
      row.total_words += n;
      ++row.documents;
    }
  }
  return stats;
}

std::string stats_to_csv(const SectionStats& stats) {
  std::string out = "section,min,max,mean\n";
  for (Section s : kSections) {
    const auto& row = stats[s];
    // mean = total / documents rounded half-up to 2 decimals, exact
    std::string mean = "0.00";
    if (row.documents > 0) {
      const std::size_t hundredths =
          (200 * row.total_words / row.documents + 1) / 2;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu.%02zu", hundredths / 100, hundredths % 100);
      mean = buf;
    }
    out += std::string(section_name(s)) + "," + std::to_string(row.min_words) + "," +
           std::to_string(row.max_words) + "," + mean + "\n";
  }
  return out;
}

}  // namespace pens
