#include "featspace/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

#include "featspace/error.hpp"
#include "featspace/io.hpp"

namespace featspace {

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string file_sha256(const std::string& path) { return sha256_hex(io::read_file(path)); }

nlohmann::ordered_json to_json(const ExperimentManifest& m) {
  nlohmann::ordered_json j;
  j["schema_version"] = m.schema_version;
  j["subcommand"] = m.subcommand;
  j["args"] = m.args;
  j["params"] = m.params;
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& in : m.inputs) j["inputs"].push_back({{"path", in.path}, {"sha256", in.sha256}});
  j["seeds"] = m.seeds;
  j["outputs"] = m.outputs;
  j["notes"] = m.notes;
  return j;
}

ExperimentManifest manifest_from_json(const nlohmann::ordered_json& j) {
  ExperimentManifest m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    require(m.schema_version == kManifestSchemaVersion, ErrorCode::BadSpec,
            "unsupported manifest schema version " + std::to_string(m.schema_version));
    m.subcommand = j.at("subcommand").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.params = j.value("params", nlohmann::ordered_json::object());
    for (const auto& in : j.value("inputs", nlohmann::ordered_json::array())) {
      m.inputs.push_back({in.at("path").get<std::string>(), in.at("sha256").get<std::string>()});
    }
    m.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.notes = j.value("notes", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadSpec, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const std::string& path, const ExperimentManifest& m) {
  io::write_file(path, to_json(m).dump(2) + "\n");
}

ExperimentManifest load_manifest(const std::string& path) {
  const std::string text = io::read_file(path);
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadSpec, path + ": " + e.what());
  }
  return manifest_from_json(j);
}

void verify_inputs(const ExperimentManifest& m) {
  for (const auto& in : m.inputs) {
    const std::string actual = file_sha256(in.path);
    require(actual == in.sha256, ErrorCode::DigestMismatch,
            "input '" + in.path + "' changed: expected sha256 " + in.sha256 + ", found " + actual);
  }
}

}  // namespace featspace
