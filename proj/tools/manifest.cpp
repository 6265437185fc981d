#include "manifest.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pemnet/error.hpp"
#include "pemnet/hash.hpp"

namespace pemnet::cli {
namespace {

nlohmann::json entries_json(const std::vector<FileEntry>& entries) {
  auto arr = nlohmann::json::array();
  for (const auto& e : entries) arr.push_back({{"path", e.path}, {"sha256", e.sha256}});
  return arr;
}

std::vector<FileEntry> entries_from(const nlohmann::json& arr) {
  std::vector<FileEntry> out;
  for (const auto& e : arr) out.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>()});
  return out;
}

}  // namespace

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["artifact_version"] = artifact_version;
  j["command"] = command;
  j["config_path"] = config_path;
  j["config_text"] = config_text;
  j["args"] = args;
  j["seeds"] = seeds;
  j["inputs"] = entries_json(inputs);
  j["outputs"] = entries_json(outputs);
  j["wall_clock_seconds"] = wall_clock_seconds;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.artifact_version = j.at("artifact_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config_path = j.at("config_path").get<std::string>();
    m.config_text = j.at("config_text").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.inputs = entries_from(j.at("inputs"));
    m.outputs = entries_from(j.at("outputs"));
    m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad manifest: ") + e.what());
  }
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

FileEntry input_entry(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("input not found: " + path.string());
  return {std::filesystem::absolute(path).lexically_normal().string(), sha256_file(path)};
}

void verify_input(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("input not found: " + path.string());
  const auto manifest_path = path.parent_path() / kManifestName;
  if (!std::filesystem::is_regular_file(manifest_path)) return;
  const auto manifest = RunManifest::load(manifest_path);
  const auto name = path.filename().string();
  for (const auto& out : manifest.outputs) {
    if (out.path != name) continue;
    if (out.sha256 != sha256_file(path))
      throw ConfigError("stale input " + path.string() + ": content no longer matches " + manifest_path.string());
    return;
  }
}

}  // namespace pemnet::cli
