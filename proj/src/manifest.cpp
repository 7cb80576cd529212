#include "cardmatch/manifest.hpp"

#include <cstdio>
#include <ctime>

#include "cardmatch/csv.hpp"
#include "json.hpp"

namespace cardmatch {

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& text) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(text)));
  return std::string(buf);
}

std::string hash_file(const std::string& path) {
  return fnv1a64_hex(read_text_file(path));
}

std::string iso_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

std::string manifest_to_json(const RunManifest& manifest) {
  nlohmann::json doc;
  doc["subcommand"] = manifest.subcommand;
  doc["config"]["path"] = manifest.config_path;
  doc["config"]["fnv1a64"] = manifest.config_hash;
  doc["inputs"] = nlohmann::json::array();
  for (const ManifestEntry& e : manifest.inputs) {
    doc["inputs"].push_back({{"path", e.path}, {"fnv1a64", e.hash}});
  }
  doc["seed"] = manifest.seed;
  doc["version"] = manifest.version;
  doc["started_at"] = manifest.started_at;
  doc["finished_at"] = manifest.finished_at;
  doc["outputs"] = nlohmann::json::array();
  for (const ManifestEntry& e : manifest.outputs) {
    doc["outputs"].push_back({{"path", e.path}, {"fnv1a64", e.hash}});
  }
  return doc.dump(2) + "\n";
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  write_text_file_atomic(path, manifest_to_json(manifest));
}

}  // namespace cardmatch
