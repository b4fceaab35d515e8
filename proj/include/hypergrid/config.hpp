#pragma once

// Flat TOML-compatible key/value files: `key = value` lines where a value is
// a quoted string, a number, true/false or a one-line array of those.
// `[section]` headers prefix the following keys with "section.".

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hypergrid/errors.hpp"

namespace hypergrid {

using ConfigScalar = std::variant<std::string, double, bool>;
using ConfigValue = std::variant<ConfigScalar, std::vector<ConfigScalar>>;

class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& is) {
    KeyValueFile f;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      line = strip_comment(line);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(lineno, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(lineno, "expected key = value");
      std::string key = trim(line.substr(0, eq));
      if (key.empty()) fail(lineno, "empty key");
      if (!section.empty()) key = section + "." + key;
      const std::string raw = trim(line.substr(eq + 1));
      if (raw.empty()) fail(lineno, "missing value for " + key);
      if (f.values_.count(key)) fail(lineno, "duplicate key " + key);
      if (raw.front() == '[') {
        if (raw.back() != ']') fail(lineno, "arrays must close on the same line");
        std::vector<ConfigScalar> items;
        for (const auto& item : split_array(raw.substr(1, raw.size() - 2)))
          items.push_back(parse_scalar(item, lineno));
        f.values_[key] = std::move(items);
      } else {
        f.values_[key] = parse_scalar(raw, lineno);
      }
    }
    return f;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    return parse(is);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, ConfigValue>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& s = scalar(key);
    if (auto p = std::get_if<std::string>(&s)) return *p;
    throw ConfigError(key + " must be a string");
  }

  double get_number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& s = scalar(key);
    if (auto p = std::get_if<double>(&s)) return *p;
    throw ConfigError(key + " must be a number");
  }

  std::size_t get_count(const std::string& key, std::size_t fallback) const {
    const double v = get_number(key, static_cast<double>(fallback));
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw ConfigError(key + " must be a nonnegative integer");
    return static_cast<std::size_t>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& s = scalar(key);
    if (auto p = std::get_if<bool>(&s)) return *p;
    throw ConfigError(key + " must be true or false");
  }

  std::vector<double> get_numbers(const std::string& key) const {
    if (!has(key)) return {};
    const auto& v = values_.at(key);
    std::vector<double> out;
    if (auto arr = std::get_if<std::vector<ConfigScalar>>(&v)) {
      for (const auto& item : *arr) {
        if (auto p = std::get_if<double>(&item)) out.push_back(*p);
        else throw ConfigError(key + " must be an array of numbers");
      }
      return out;
    }
    return {get_number(key, 0)};
  }

  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
    return out;
  }

 private:
  const ConfigScalar& scalar(const std::string& key) const {
    const auto& v = values_.at(key);
    if (auto p = std::get_if<ConfigScalar>(&v)) return *p;
    throw ConfigError(key + " must be a single value, not an array");
  }

  [[noreturn]] static void fail(std::size_t lineno, const std::string& what) {
    throw ConfigError("config line " + std::to_string(lineno) + ": " + what);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static std::vector<std::string> split_array(const std::string& body) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char ch : body) {
      if (ch == '"') quoted = !quoted;
      if (ch == ',' && !quoted) {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
  }

  static ConfigScalar parse_scalar(const std::string& raw, std::size_t lineno) {
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') return raw.substr(1, raw.size() - 2);
    if (raw == "true") return true;
    if (raw == "false") return false;
    std::string digits;
    for (char ch : raw)
      if (ch != '_') digits += ch;
    double v = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) fail(lineno, "cannot parse value \"" + raw + "\"");
    return v;
  }

  std::map<std::string, ConfigValue> values_;
};

}  // namespace hypergrid
