#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace negprec {

/// key=value text. '#' starts a comment, blank lines are ignored, keys are
/// case-sensitive, later assignments win. List values are comma-separated.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(std::string_view key) const { return values_.find(std::string(key)) != values_.end(); }
  std::optional<std::string> get(std::string_view key) const;
  std::string require(std::string_view key) const;
  std::vector<std::string> get_list(std::string_view key) const;

  std::optional<double> get_double(std::string_view key) const;
  std::optional<std::uint64_t> get_unsigned(std::string_view key) const;
  std::vector<double> get_double_list(std::string_view key) const;
  std::vector<std::uint64_t> get_unsigned_list(std::string_view key) const;

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  const std::string& origin() const noexcept { return origin_; }

  /// Throws UsageError naming the first key not in `known`.
  void reject_unknown(const std::vector<std::string_view>& known) const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

/// Shortest representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_unsigned(std::string_view text, std::string_view what);

/// 64-bit FNV-1a, hex encoded; stable across platforms.
std::string stable_hash(std::string_view text);

}  // namespace negprec
