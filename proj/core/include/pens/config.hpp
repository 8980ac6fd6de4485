#pragma once

// Flat "key = value" configuration files with flag overrides.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace pens {

/// One "key = value" per line; '#' starts a comment, blank lines are
/// ignored, later assignments win.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  /// "key=value", as given to --set.
  void apply_override(std::string_view assignment);

  bool has(std::string_view key) const;
  std::optional<std::string> find(std::string_view key) const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

  std::string to_text() const;

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

/// Typed access that collects every problem instead of stopping at the
/// first; finish() throws one ConfigError listing them all, including keys
/// nobody asked for.
class ConfigReader {
 public:
  explicit ConfigReader(const Config& config) : config_(config) {}

  std::string string(std::string_view key, std::optional<std::string> fallback = std::nullopt);
  std::uint64_t unsigned_int(std::string_view key, std::optional<std::uint64_t> fallback = std::nullopt);
  double real(std::string_view key, std::optional<double> fallback = std::nullopt);
  bool boolean(std::string_view key, std::optional<bool> fallback = std::nullopt);
  /// Comma-separated, whitespace-trimmed, empty items dropped.
  std::vector<std::string> list(std::string_view key,
                                std::optional<std::vector<std::string>> fallback = std::nullopt);
  std::vector<std::uint64_t> unsigned_list(
      std::string_view key, std::optional<std::vector<std::uint64_t>> fallback = std::nullopt);

  void problem(std::string message) { problems_.push_back(std::move(message)); }
  const std::vector<std::string>& problems() const { return problems_; }
  void finish();

 private:
  std::optional<std::string> lookup(std::string_view key);

  const Config& config_;
  std::set<std::string, std::less<>> used_;
  std::vector<std::string> problems_;
};

}  // namespace pens
