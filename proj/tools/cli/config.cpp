#include "cli/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "falmkit/csv.hpp"
#include "falmkit/error.hpp"

namespace falmkit::cli {
namespace {

[[noreturn]] void fail(const std::string& message) { throw Error(ErrorKind::kConfig, message); }

std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace

void Settings::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file " + path.string());
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(path.string() + ":" + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    try {
      set(key, unquote(trim(line.substr(eq + 1))));
    } catch (const Error& e) {
      fail(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void Settings::set_pair(const std::string& pair) {
  const auto eq = pair.find('=');
  if (eq == std::string::npos) fail("--set expects key=value, got '" + pair + "'");
  set(trim(pair.substr(0, eq)), unquote(trim(pair.substr(eq + 1))));
}

void Settings::set(const std::string& key, const std::string& value) {
  if (key.empty()) fail("empty config key");
  if (!allowed_.count(key)) fail("unknown config key '" + key + "' for this command");
  values_[key] = value;
}

std::string Settings::text(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Settings::real(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto v = parse_real(it->second);
  if (!v || !std::isfinite(*v)) fail("config key '" + key + "' expects a number, got '" + it->second + "'");
  return *v;
}

std::size_t Settings::count(const std::string& key, std::size_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto v = parse_integer(it->second);
  if (!v || *v < 0) fail("config key '" + key + "' expects a non-negative integer, got '" + it->second + "'");
  return static_cast<std::size_t>(*v);
}

std::optional<std::uint64_t> Settings::u64(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  const std::string t = trim(it->second);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(t, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || t[0] == '-') {
    fail("config key '" + key + "' expects an unsigned integer, got '" + it->second + "'");
  }
  return v;
}

std::vector<std::string> Settings::list(const std::string& key) const {
  std::vector<std::string> out;
  const auto it = values_.find(key);
  if (it == values_.end()) return out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> Settings::reals(const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& item : list(key)) {
    const auto v = parse_real(item);
    if (!v || !std::isfinite(*v)) fail("config key '" + key + "' expects numbers, got '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace falmkit::cli
