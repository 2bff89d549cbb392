#pragma once

// Declarative record of one CLI run: enough to re-run it and to detect when
// an input file changed since.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace featspace {

inline constexpr int kManifestSchemaVersion = 1;

struct ManifestInput {
  std::string path;
  std::string sha256;  // lowercase hex
};

struct ExperimentManifest {
  int schema_version = kManifestSchemaVersion;
  std::string subcommand;
  std::vector<std::string> args;  // subcommand arguments, replayed verbatim
  nlohmann::ordered_json params = nlohmann::ordered_json::object();  // resolved parameters
  std::vector<ManifestInput> inputs;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
  std::string notes;
};

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::string& path);

nlohmann::ordered_json to_json(const ExperimentManifest& m);
/// Throws BadSpec on a malformed document or unsupported schema version.
ExperimentManifest manifest_from_json(const nlohmann::ordered_json& j);

void save_manifest(const std::string& path, const ExperimentManifest& m);
ExperimentManifest load_manifest(const std::string& path);

/// Recomputes every input digest; throws DigestMismatch on the first change.
void verify_inputs(const ExperimentManifest& m);

}  // namespace featspace
