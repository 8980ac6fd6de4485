#include "pens/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pens/error.hpp"

namespace pens {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config config;
  std::vector<std::string> problems;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      problems.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      problems.push_back("line " + std::to_string(line_no) + ": empty key");
      continue;
    }
    config.set(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return config;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto key = eq == std::string_view::npos ? std::string_view{} : trim(assignment.substr(0, eq));
  if (key.empty()) throw ConfigError({"override '" + std::string(assignment) + "' is not key=value"});
  set(std::string(key), std::string(trim(assignment.substr(eq + 1))));
}

bool Config::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> Config::find(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

// -- ConfigReader ------------------------------------------------------------------------

std::optional<std::string> ConfigReader::lookup(std::string_view key) {
  used_.emplace(key);
  return config_.find(key);
}

std::string ConfigReader::string(std::string_view key, std::optional<std::string> fallback) {
  if (auto v = lookup(key)) return *v;
  if (fallback) return *fallback;
  problem("missing required key '" + std::string(key) + "'");
  return {};
}

std::uint64_t ConfigReader::unsigned_int(std::string_view key, std::optional<std::uint64_t> fallback) {
  const auto v = lookup(key);
  if (!v) {
    if (fallback) return *fallback;
    problem("missing required key '" + std::string(key) + "'");
    return 0;
  }
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || end != v->data() + v->size() || v->empty()) {
    problem("key '" + std::string(key) + "': '" + *v + "' is not a non-negative integer");
    return fallback.value_or(0);
  }
  return out;
}

double ConfigReader::real(std::string_view key, std::optional<double> fallback) {
  const auto v = lookup(key);
  if (!v) {
    if (fallback) return *fallback;
    problem("missing required key '" + std::string(key) + "'");
    return 0;
  }
  double out = 0;
  const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || end != v->data() + v->size() || v->empty()) {
    problem("key '" + std::string(key) + "': '" + *v + "' is not a number");
    return fallback.value_or(0);
  }
  return out;
}

bool ConfigReader::boolean(std::string_view key, std::optional<bool> fallback) {
  const auto v = lookup(key);
  if (!v) {
    if (fallback) return *fallback;
    problem("missing required key '" + std::string(key) + "'");
    return false;
  }
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  problem("key '" + std::string(key) + "': '" + *v + "' is not a boolean");
  return fallback.value_or(false);
}

std::vector<std::string> ConfigReader::list(std::string_view key,
                                            std::optional<std::vector<std::string>> fallback) {
  const auto v = lookup(key);
  if (!v) {
    if (fallback) return *fallback;
    problem("missing required key '" + std::string(key) + "'");
    return {};
  }
  std::vector<std::string> out;
  std::string_view rest = *v;
  while (true) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  if (out.empty()) problem("key '" + std::string(key) + "' is an empty list");
  return out;
}

std::vector<std::uint64_t> ConfigReader::unsigned_list(
    std::string_view key, std::optional<std::vector<std::uint64_t>> fallback) {
  if (!config_.has(key) && fallback) {
    used_.emplace(key);
    return *fallback;
  }
  std::vector<std::uint64_t> out;
  for (const auto& item : list(key)) {
    std::uint64_t n = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
    if (ec != std::errc{} || end != item.data() + item.size()) {
      problem("key '" + std::string(key) + "': '" + item + "' is not a non-negative integer");
    } else {
      out.push_back(n);
    }
  }
  return out;
}

void ConfigReader::finish() {
  for (const auto& [key, value] : config_.entries()) {
    if (!used_.contains(key)) problem("unknown key '" + key + "'");
  }
  if (!problems_.empty()) throw ConfigError(problems_);
}

}  // namespace pens
