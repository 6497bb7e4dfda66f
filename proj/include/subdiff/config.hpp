#pragma once

// Flat key-value configuration with section headers:
//
//   # comment            (also ';')
//   [problem]
//   alpha = 0.5
//   coefficient = a1
//
// Keys are addressed as "section.key"; keys before the first header have no
// section prefix. Later assignments override earlier ones.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "subdiff/error.hpp"

namespace subdiff {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Shortest round-trip decimal form of a double; independent of the C locale.
inline std::string format_double(double v) {
  char buf[64];
  if (v == 0.0) v = 0.0;  // print -0 as 0
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Config {
 public:
  static Config parse(std::string_view text, const std::string& origin = "<config>") {
    Config cfg;
    std::string section;
    std::size_t line_no = 0;
    while (!text.empty()) {
      const auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      ++line_no;
      line = detail::trim(line);
      if (line.empty() || line.front() == '#' || line.front() == ';') continue;
      auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
      if (line.front() == '[') {
        if (line.back() != ']') throw InvalidArgument(where() + "unterminated section header");
        section = std::string(detail::trim(line.substr(1, line.size() - 2)));
        if (section.empty() || section.find_first_of(" \t=.") != std::string::npos)
          throw InvalidArgument(where() + "bad section name '" + section + "'");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw InvalidArgument(where() + "expected key = value");
      const std::string key(detail::trim(line.substr(0, eq)));
      if (key.empty() || key.find_first_of(" \t") != std::string::npos)
        throw InvalidArgument(where() + "bad key '" + key + "'");
      cfg.set(section.empty() ? key : section + "." + key, std::string(detail::trim(line.substr(eq + 1))));
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return to_double(key, it->second);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::int64_t v = 0;
    const auto& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw InvalidArgument("config key '" + key + "' expects an integer, got '" + s + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string s = it->second;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw InvalidArgument("config key '" + key + "' expects a boolean, got '" + it->second + "'");
  }

  /// Comma separated list of doubles.
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::string_view rest = it->second;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      out.push_back(to_double(key, std::string(detail::trim(rest.substr(0, comma)))));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  /// Throws for any key not in `known`.
  void require_known(const std::set<std::string>& known) const {
    for (const auto& [k, v] : values_)
      if (!known.count(k)) throw InvalidArgument("unknown config key '" + k + "'");
  }

  /// Serialises back to the same grammar, grouped by section.
  std::string to_text() const {
    std::ostringstream os;
    // unsectioned keys must precede the first header
    for (const auto& [k, v] : values_)
      if (k.find('.') == std::string::npos) os << k << " = " << v << '\n';
    std::string current;
    for (const auto& [k, v] : values_) {
      const auto dot = k.find('.');
      if (dot == std::string::npos) continue;
      const std::string section = k.substr(0, dot);
      if (section != current) {
        if (os.tellp() > 0) os << '\n';
        os << '[' << section << "]\n";
        current = section;
      }
      os << k.substr(dot + 1) << " = " << v << '\n';
    }
    return os.str();
  }

 private:
  static double to_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw InvalidArgument("config key '" + key + "' expects a number, got '" + s + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace subdiff
