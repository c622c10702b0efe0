#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace opkl {

/// Raised on malformed configuration text or missing/mistyped keys.
class config_error : public std::runtime_error {
public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/**
 * Flat key = value configuration text.  One assignment per line, '#' starts
 * a comment, keys are dotted paths.  Values stay strings until read through
 * a typed getter.
 */
class Config {
public:
  static Config parse(const std::string& text, const std::string& origin = "<string>") {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw config_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (key.empty())
        throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
      if (c.values_.count(key))
        throw config_error(origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
      c.values_[key] = val;
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }

  [[nodiscard]] std::string get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw config_error("missing config key: " + key);
    return it->second;
  }
  [[nodiscard]] std::string get_string(const std::string& key, const std::string& dflt) const {
    return has(key) ? get_string(key) : dflt;
  }

  [[nodiscard]] double get_double(const std::string& key) const {
    const std::string s = get_string(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw config_error("config key " + key + ": not a number: " + s);
    }
  }
  [[nodiscard]] double get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
  }

  [[nodiscard]] long get_int(const std::string& key) const {
    const std::string s = get_string(key);
    try {
      std::size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw config_error("config key " + key + ": not an integer: " + s);
    }
  }
  [[nodiscard]] long get_int(const std::string& key, long dflt) const {
    return has(key) ? get_int(key) : dflt;
  }

  [[nodiscard]] bool get_bool(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    const std::string s = get_string(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw config_error("config key " + key + ": not a boolean: " + s);
  }

  /// Comma-separated list of integers.
  [[nodiscard]] std::vector<long> get_int_list(const std::string& key) const {
    const std::string s = get_string(key);
    std::vector<long> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        out.push_back(std::stol(item));
      } catch (const std::exception&) {
        throw config_error("config key " + key + ": not an integer list: " + s);
      }
    }
    if (out.empty()) throw config_error("config key " + key + ": empty list");
    return out;
  }

  /// Comma-separated list of reals.
  [[nodiscard]] std::vector<double> get_double_list(const std::string& key) const {
    const std::string s = get_string(key);
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw config_error("config key " + key + ": not a number list: " + s);
      }
    }
    if (out.empty()) throw config_error("config key " + key + ": empty list");
    return out;
  }

  /// Canonical text: sorted key = value lines.  Basis of the run hash.
  [[nodiscard]] std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      out += k;
      out += " = ";
      out += v;
      out += '\n';
    }
    return out;
  }

  [[nodiscard]] const std::map<std::string, std::string>& entries() const { return values_; }

private:
  std::map<std::string, std::string> values_;
};

/// FNV-1a hash of the canonical config text, printed as 16 hex digits.
[[nodiscard]] inline std::string config_hash(const Config& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (const char ch : c.canonical()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace opkl
