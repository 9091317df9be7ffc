#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spfu/tensor.hpp"

namespace spfu {

class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace detail

/// Plain-text "key = value" configuration. '#' starts a comment; blank lines
/// are ignored. A key may repeat (all values are kept in file order).
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text) {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
      const auto key = detail::trim(line.substr(0, eq));
      const auto value = detail::trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      cfg.entries_.emplace_back(std::string(key), std::string(value));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(std::string_view key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return true;
    return false;
  }

  /// Last value given for key.
  const std::string& get(std::string_view key) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
      if (it->first == key) return it->second;
    throw ConfigError("missing key '" + std::string(key) + "'");
  }

  std::vector<std::string> get_all(std::string_view key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
      if (k == key) out.push_back(v);
    return out;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Locale-independent number parsing.
template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  s = detail::trim(s);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError("invalid " + std::string(what) + " '" + std::string(s) + "'");
  return value;
}

inline bool parse_bool(std::string_view s, std::string_view what) {
  s = detail::trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("invalid boolean for " + std::string(what) + ": '" + std::string(s) + "'");
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto next = s.find(sep, pos);
    out.push_back(detail::trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(std::string_view s, std::string_view what) {
  std::vector<T> out;
  for (auto item : split(s, ',')) out.push_back(parse_number<T>(item, what));
  return out;
}

}  // namespace spfu
