#pragma once

// Plain-text key = value files. '#' starts a comment; keys are unique.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "vjspoof/error.hpp"

namespace vjspoof {

class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "config") {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw Error(Errc::invalid_config, origin + ":" + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = trim(t.substr(0, eq));
      if (key.empty()) throw Error(Errc::invalid_config, origin + ":" + std::to_string(lineno) + ": empty key");
      if (kv.values_.count(key) != 0) {
        throw Error(Errc::invalid_config, origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
      }
      kv.values_[key] = trim(t.substr(eq + 1));
    }
    return kv;
  }

  static KeyValues load(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw Error(Errc::file_not_found, path.string());
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = format(value); }
  void set(const std::string& key, long long value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void erase(const std::string& key) { values_.erase(key); }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  double get(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : number<double>(key, it->second);
  }
  long long get(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : number<long long>(key, it->second);
  }
  int get(const std::string& key, int fallback) const {
    return static_cast<int>(get(key, static_cast<long long>(fallback)));
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : number<std::uint64_t>(key, it->second);
  }

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  /// Sorted key = value lines.
  std::string str() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    out << str();
    if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
  }

  /// Shortest text that reads back to the same double.
  static std::string format(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  template <typename T>
  static T number(const std::string& key, const std::string& text) {
    T v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) {
      throw Error(Errc::invalid_config, key + ": not a number: '" + text + "'");
    }
    return v;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace vjspoof
