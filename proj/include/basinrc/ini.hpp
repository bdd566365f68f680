#pragma once

// Flat sectioned key-value files:
//
//   # comment
//   [reservoir]
//   nodes = 200
//   spectral_radius = 0.4
//
// Keys are addressed as "section.key". Every lookup is recorded so that
// leftover (misspelled) keys can be reported after parsing.

#include "basinrc/error.hpp"
#include "basinrc/timeseries.hpp"

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace basinrc {

class IniFile {
public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  IniFile() = default;

  static IniFile parse(std::istream& is, std::string origin = "<config>") {
    IniFile ini;
    ini.origin_ = std::move(origin);
    std::string raw;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
      ++lineno;
      std::string_view line = trim(raw);
      if (line.empty() || line.front() == '#' || line.front() == ';')
        continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(ini.where(lineno) + "unterminated section header");
        section = std::string(trim(line.substr(1, line.size() - 2)));
        if (section.empty())
          throw ConfigError(ini.where(lineno) + "empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(ini.where(lineno) + "expected 'key = value'");
      const std::string key{trim(line.substr(0, eq))};
      std::string_view value = trim(line.substr(eq + 1));
      if (const auto hash = value.find(" #"); hash != std::string_view::npos)
        value = trim(value.substr(0, hash));
      if (key.empty())
        throw ConfigError(ini.where(lineno) + "missing key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (ini.entries_.contains(full))
        throw ConfigError(ini.where(lineno) + "field '" + full + "' set twice (first on line " +
                          std::to_string(ini.entries_[full].line) + ")");
      ini.entries_[full] = {std::string(value), lineno};
    }
    return ini;
  }

  void set(const std::string& key, std::string value) { entries_[key] = {std::move(value), 0}; }
  [[nodiscard]] bool contains(const std::string& key) const { return entries_.contains(key); }
  [[nodiscard]] const std::map<std::string, Entry>& entries() const noexcept { return entries_; }
  [[nodiscard]] const std::string& origin() const noexcept { return origin_; }

  [[nodiscard]] std::optional<std::string> get_string(const std::string& key) const {
    const auto it = find(key);
    if (!it)
      return std::nullopt;
    return it->value;
  }

  [[nodiscard]] std::string require_string(const std::string& key) const {
    auto v = get_string(key);
    if (!v)
      throw ConfigError(origin_ + ": missing required field '" + key + "'");
    return *v;
  }

  [[nodiscard]] std::optional<double> get_double(const std::string& key) const {
    const auto* e = find(key);
    if (!e)
      return std::nullopt;
    return to_number<double>(key, *e, e->value);
  }

  [[nodiscard]] std::optional<std::int64_t> get_int(const std::string& key) const {
    const auto* e = find(key);
    if (!e)
      return std::nullopt;
    return to_number<std::int64_t>(key, *e, e->value);
  }

  [[nodiscard]] std::optional<std::uint64_t> get_uint(const std::string& key) const {
    const auto* e = find(key);
    if (!e)
      return std::nullopt;
    return to_number<std::uint64_t>(key, *e, e->value);
  }

  [[nodiscard]] std::optional<bool> get_bool(const std::string& key) const {
    const auto* e = find(key);
    if (!e)
      return std::nullopt;
    if (e->value == "true" || e->value == "on" || e->value == "yes" || e->value == "1")
      return true;
    if (e->value == "false" || e->value == "off" || e->value == "no" || e->value == "0")
      return false;
    throw ConfigError(where(*e) + "field '" + key + "': expected true/false, got '" + e->value + "'");
  }

  [[nodiscard]] std::optional<std::vector<double>> get_doubles(const std::string& key) const {
    const auto* e = find(key);
    if (!e)
      return std::nullopt;
    std::vector<double> out;
    for (auto field : detail::split(e->value))
      out.push_back(to_number<double>(key, *e, trim(field)));
    return out;
  }

  [[nodiscard]] std::optional<std::vector<std::int64_t>> get_ints(const std::string& key) const {
    const auto* e = find(key);
    if (!e)
      return std::nullopt;
    std::vector<std::int64_t> out;
    for (auto field : detail::split(e->value))
      out.push_back(to_number<std::int64_t>(key, *e, trim(field)));
    return out;
  }

  /// Keys that were never looked up.
  [[nodiscard]] std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_)
      if (!used_.contains(k))
        out.push_back(k);
    return out;
  }

  void reject_unused() const {
    const auto left = unused();
    if (!left.empty()) {
      const auto& e = entries_.at(left.front());
      throw ConfigError(where(e) + "unknown field '" + left.front() + "'");
    }
  }

  /// Raises a ConfigError that names `key` and, when known, its line.
  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    const auto it = entries_.find(key);
    const std::string loc = it != entries_.end() ? where(it->second) : origin_ + ": ";
    throw ConfigError(loc + "field '" + key + "': " + message);
  }

private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
      s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
      s.remove_suffix(1);
    return s;
  }

  [[nodiscard]] std::string where(std::size_t line) const {
    return origin_ + ":" + std::to_string(line) + ": ";
  }
  [[nodiscard]] std::string where(const Entry& e) const {
    return e.line > 0 ? where(e.line) : origin_ + ": ";
  }

  const Entry* find(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
      return nullptr;
    used_.insert(key);
    return &it->second;
  }

  template <typename T>
  T to_number(const std::string& key, const Entry& e, std::string_view text) const {
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty())
      throw ConfigError(where(e) + "field '" + key + "': cannot parse '" + std::string(text) + "'");
    return v;
  }

  std::string origin_ = "<config>";
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

} // namespace basinrc
