#include "pemnet/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "pemnet/error.hpp"

namespace pemnet {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

double parse_real(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("empty value for " + what);
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE)
    throw ConfigError("not a number for " + what + ": '" + t + "'");
  return value;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::string cleaned;
  for (char c : text)
    if (c != '[' && c != ']') cleaned.push_back(c);
  std::vector<double> out;
  std::stringstream ss(cleaned);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(item, "list element"));
  if (out.empty()) throw ConfigError("empty list: '" + text + "'");
  return out;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'name = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty name");
    if (cfg.values_.count(key))
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.values_.emplace(std::move(key), std::move(value));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const std::string& KeyValueConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
  return parse_real(get_string(key), key);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string& key) const {
  const std::string& s = get_string(key);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw ConfigError("not an integer for " + key + ": '" + s + "'");
  return v;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
  try {
    return parse_real_list(get_string(key));
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::vector<std::string> KeyValueConfig::sections(const std::string& prefix) const {
  std::set<std::string> names;
  for (const auto& [key, value] : values_) {
    if (key.rfind(prefix, 0) != 0) continue;
    const auto rest = key.substr(prefix.size());
    const auto dot = rest.find('.');
    if (dot != std::string::npos && dot > 0) names.insert(rest.substr(0, dot));
  }
  return {names.begin(), names.end()};
}

KeyValueConfig KeyValueConfig::subset(const std::string& prefix) const {
  KeyValueConfig out;
  for (const auto& [key, value] : values_)
    if (key.rfind(prefix, 0) == 0) out.values_.emplace(key.substr(prefix.size()), value);
  return out;
}

std::string KeyValueConfig::to_string() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace pemnet
