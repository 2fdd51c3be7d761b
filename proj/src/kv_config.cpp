#include "negprec/kv_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "negprec/error.hpp"

namespace negprec {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string_view origin) {
  KeyValueConfig cfg;
  cfg.origin_ = std::string(origin);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw UsageError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
    cfg.values_[std::move(key)] = trim(std::string_view(t).substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::require(std::string_view key) const {
  auto v = get(key);
  if (!v) throw UsageError(origin_ + ": missing required key '" + std::string(key) + "'");
  return *v;
}

std::vector<std::string> KeyValueConfig::get_list(std::string_view key) const {
  std::vector<std::string> out;
  auto v = get(key);
  if (!v) return out;
  std::string item;
  std::istringstream in(*v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::optional<double> KeyValueConfig::get_double(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  return parse_double(*v, origin_ + ": " + std::string(key));
}

std::optional<std::uint64_t> KeyValueConfig::get_unsigned(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  return parse_unsigned(*v, origin_ + ": " + std::string(key));
}

std::vector<double> KeyValueConfig::get_double_list(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : get_list(key)) out.push_back(parse_double(item, origin_ + ": " + std::string(key)));
  return out;
}

std::vector<std::uint64_t> KeyValueConfig::get_unsigned_list(std::string_view key) const {
  std::vector<std::uint64_t> out;
  for (const auto& item : get_list(key)) out.push_back(parse_unsigned(item, origin_ + ": " + std::string(key)));
  return out;
}

void KeyValueConfig::reject_unknown(const std::vector<std::string_view>& known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError(origin_ + ": unknown key '" + key + "'");
    }
  }
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw UsageError("cannot format number");
  return std::string(buf, end);
}

double parse_double(std::string_view text, std::string_view what) {
  const std::string t = trim(text);
  double value = 0.0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty()) {
    throw UsageError(std::string(what) + ": '" + t + "' is not a number");
  }
  return value;
}

std::uint64_t parse_unsigned(std::string_view text, std::string_view what) {
  const std::string t = trim(text);
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty()) {
    throw UsageError(std::string(what) + ": '" + t + "' is not a non-negative integer");
  }
  return value;
}

std::string stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace negprec
