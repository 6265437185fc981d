#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pemnet::cli {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct FileEntry {
  std::string path;  // absolute for inputs, relative to the run directory for outputs
  std::string sha256;
};

/// Record of one command invocation: enough to re-run it and to check that
/// its inputs have not changed since.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_text;
  std::vector<std::string> args;  // argv without the program name and --out
  std::map<std::string, std::uint64_t> seeds;
  std::vector<FileEntry> inputs;
  std::vector<FileEntry> outputs;
  double wall_clock_seconds = 0.0;
  std::string artifact_version = kArtifactVersion;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  static RunManifest load(const std::filesystem::path& path);
};

inline constexpr const char* kManifestName = "manifest.json";

/// Refuses (ConfigError) an input whose sibling manifest lists it with a different hash.
void verify_input(const std::filesystem::path& path);

FileEntry input_entry(const std::filesystem::path& path);

}  // namespace pemnet::cli
