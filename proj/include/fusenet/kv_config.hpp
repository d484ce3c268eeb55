#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fusenet {

/// Line-oriented `key = value` text. Blank lines and lines starting with '#' are ignored;
/// whitespace around keys and values is trimmed; a repeated key keeps the last value.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated unsigned integers.
  std::vector<std::uint64_t> get_uint_list(const std::string& key) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Throws ConfigError naming the first key not in `allowed`.
  void require_known(const std::set<std::string>& allowed) const;
  /// Sorted `key=value` lines, so equal configs serialize to equal text.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a(const std::string& text);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace fusenet
