#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace falmkit::cli {

/// Flat key=value settings. Later sources override earlier ones: defaults, then the config
/// file, then --set pairs, then dedicated flags.
class Settings {
 public:
  explicit Settings(std::set<std::string> allowed) : allowed_(std::move(allowed)) {}

  /// Lines are `key = value`; `#` starts a comment; values may be double-quoted.
  void load_file(const std::filesystem::path& path);
  /// Parses `key=value`.
  void set_pair(const std::string& pair);
  void set(const std::string& key, const std::string& value);

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }
  [[nodiscard]] std::string text(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double real(const std::string& key, double fallback) const;
  [[nodiscard]] std::size_t count(const std::string& key, std::size_t fallback) const;
  [[nodiscard]] std::optional<std::uint64_t> u64(const std::string& key) const;
  [[nodiscard]] std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const;
  [[nodiscard]] std::vector<std::string> list(const std::string& key) const;

  /// Every explicitly supplied value, sorted by key.
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::set<std::string> allowed_;
  std::map<std::string, std::string> values_;
};

}  // namespace falmkit::cli
