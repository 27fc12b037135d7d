#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eli {

/// Flat `key = value` settings; `#` starts a comment. Keys are dotted
/// (`encoder.dim`). See docs/config.md for the recognised keys.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  /// Throws IoError or ParseError (with line number).
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Either a comma list or `lo:hi:step`.
  std::vector<double> get_grid(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace eli
