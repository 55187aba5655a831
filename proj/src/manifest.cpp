#include "h2p/manifest.hpp"

#include <fftw3.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace h2p {

std::string program_version() { return "1.0.0"; }

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string() + " for digest");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest initialisation failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got)) != 1)
      throw std::runtime_error("sha256: digest update failed");
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw std::runtime_error("sha256: digest finalisation failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int k = 0; k < len; ++k) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", md[k]);
    hex += b;
  }
  return hex;
}

nlohmann::json make_manifest(const ManifestInput& in, const std::filesystem::path& manifest_dir) {
  nlohmann::json m;
  m["program"] = "h2p";
  m["version"] = program_version();
  m["command"] = in.command;
  m["versions"] = {{"fftw", std::string(fftw_version)},
                   {"openssl", std::string(OPENSSL_VERSION_TEXT)},
                   {"compiler", std::string(__VERSION__)}};
  m["threads"] = in.threads;
  m["wall_time_s"] = in.wall_seconds;
  if (in.config) m["config_yaml"] = write_config(*in.config);
  m["results"] = in.results;
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& p : in.outputs) {
    std::error_code ec;
    auto rel = std::filesystem::relative(p, manifest_dir, ec);
    if (ec || rel.empty()) rel = p;
    outs.push_back({{"path", rel.generic_string()},
                    {"bytes", std::filesystem::file_size(p)},
                    {"sha256", sha256_file(p)}});
  }
  m["outputs"] = outs;
  return m;
}

void write_manifest(const std::filesystem::path& path, const ManifestInput& in) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  const nlohmann::json m = make_manifest(in, dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << m.dump(2) << '\n';
  if (!out) throw std::runtime_error("manifest write failed: " + path.string());
}

nlohmann::json read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  return nlohmann::json::parse(in);
}

RunConfig manifest_config(const nlohmann::json& manifest) {
  if (!manifest.contains("config_yaml")) throw ConfigError("manifest carries no config");
  return parse_config(manifest.at("config_yaml").get<std::string>(), "<manifest config>");
}

}  // namespace h2p
