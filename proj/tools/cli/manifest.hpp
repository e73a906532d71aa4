#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace falmkit::cli {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kManifestFile = "manifest.json";

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct ManifestInput {
  std::string role;
  std::filesystem::path path;
};

/// Provenance record written once per output directory.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;  // effective settings; never includes worker count
  std::vector<ManifestInput> inputs;
  bool deterministic = false;

  /// Digest over the sorted `key=value\n` lines of `config`.
  [[nodiscard]] std::string config_digest() const;
  /// Writes manifest.json into `dir`, hashing each input. The timestamp is omitted when deterministic.
  void write(const std::filesystem::path& dir) const;
};

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace falmkit::cli
