#include "cli/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "falmkit/error.hpp"

namespace falmkit::cli {
namespace {

std::string to_hex(const unsigned char* data, unsigned len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += digits[data[i] >> 4];
    out += digits[data[i] & 0xF];
  }
  return out;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  return to_hex(md.data(), len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path.string(), 0, "", "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::string RunManifest::config_digest() const {
  std::string canonical;
  for (const auto& [k, v] : config) canonical += k + "=" + v + "\n";
  return sha256_hex(canonical);
}

void RunManifest::write(const std::filesystem::path& dir) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["seed"] = seed;
  j["config"] = config;
  j["config_digest"] = config_digest();
  auto inputs_json = nlohmann::ordered_json::array();
  for (const auto& in : inputs) {
    inputs_json.push_back({{"role", in.role}, {"file", in.path.filename().string()}, {"sha256", sha256_file(in.path)}});
  }
  j["inputs"] = inputs_json;
  j["timestamp"] = deterministic ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(utc_timestamp());
  std::ofstream out(dir / kManifestFile, std::ios::binary);
  out << j.dump(2) << "\n";
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace falmkit::cli
