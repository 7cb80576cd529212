#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cardmatch {

inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(const std::string& text);

/// fnv1a64 rendered as a fixed-width lowercase hex string.
std::string fnv1a64_hex(const std::string& text);

/// fnv1a64_hex of a file's contents.
std::string hash_file(const std::string& path);

struct ManifestEntry {
  std::string path;  // relative to the run directory for outputs
  std::string hash;
};

/// Provenance record written at the end of every CLI run. Timestamps are the
/// only wall-clock content any run emits; every other artifact is a pure
/// function of the inputs and the seed.
struct RunManifest {
  std::string subcommand;
  std::string config_path;
  std::string config_hash;
  std::vector<ManifestEntry> inputs;
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;  // ISO 8601 UTC
  std::vector<ManifestEntry> outputs;
};

/// Current UTC time as 2026-01-02T03:04:05Z.
std::string iso_utc_now();

std::string manifest_to_json(const RunManifest& manifest);

/// Serialize and write atomically (temp file + rename).
void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace cardmatch
