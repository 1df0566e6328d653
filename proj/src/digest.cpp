#include <algorithm>
#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "concept_circuits/common.hpp"
#include "concept_circuits/harness.hpp"

namespace cc {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
  }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("SHA-256 update failed");
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error("SHA-256 final failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 15]);
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot read " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (is) {
    is.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  return h.hex();
}

std::string sha256_string(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::vector<ManifestEntry> scan_outputs(const std::filesystem::path& root) {
  std::vector<ManifestEntry> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = std::filesystem::relative(e.path(), root).generic_string();
    if (rel == "manifest.json") continue;
    out.push_back({rel, sha256_file(e.path()), e.file_size()});
  }
  std::sort(out.begin(), out.end(), [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  return out;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& [step, secs] : m.timings) timings.push_back({{"step", step}, {"seconds", secs}});
  const nlohmann::json j = {{"tool_version", m.tool_version}, {"config", m.config}, {"files", files}, {"timings", timings}};
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace cc
