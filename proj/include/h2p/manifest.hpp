#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "h2p/config.hpp"

namespace h2p {

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct ManifestInput {
  std::string command;
  const RunConfig* config = nullptr;
  double wall_seconds = 0.0;
  int threads = 1;
  std::vector<std::filesystem::path> outputs;  // digested; stored relative to the manifest directory
  nlohmann::json results = nlohmann::json::object();
};

/// JSON run record: program and library versions, the effective config as
/// canonical YAML (parse_config reads it back), wall time, results and
/// SHA-256 digests of the outputs.
nlohmann::json make_manifest(const ManifestInput& in, const std::filesystem::path& manifest_dir);
void write_manifest(const std::filesystem::path& path, const ManifestInput& in);

nlohmann::json read_manifest(const std::filesystem::path& path);
RunConfig manifest_config(const nlohmann::json& manifest);

std::string program_version();

}  // namespace h2p
