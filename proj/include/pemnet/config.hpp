#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pemnet {

/// Flat `name = value` configuration. `#` starts a comment; blank lines are
/// ignored. Duplicate keys are rejected.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  const std::string& get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;

  /// Distinct names `X` such that some key starts with `prefix + X + "."`.
  std::vector<std::string> sections(const std::string& prefix) const;
  /// Entries under `prefix`, with the prefix stripped.
  KeyValueConfig subset(const std::string& prefix) const;

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  /// Canonical text form: sorted `key = value` lines.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Parses a comma separated list of reals; brackets and whitespace are ignored
/// so "[1e-8, 8e-6, 2e-4]" and "1e-8,8e-6,2e-4" are equivalent.
std::vector<double> parse_real_list(const std::string& text);

/// Strict full-string real parse; throws ConfigError naming `what`.
double parse_real(const std::string& text, const std::string& what);

}  // namespace pemnet
