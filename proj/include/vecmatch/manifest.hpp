#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace vecmatch {

/// FNV-1a, used for input digests and for deriving per-config seed streams.
inline std::uint64_t fnv1a(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) {
  return fnv1a(s.data(), s.size());
}

std::string hex64(std::uint64_t h);

/// Digest of a file's bytes. Throws ValidationError if unreadable.
std::uint64_t digest_file(const std::string& path);

/// Provenance sidecar written next to every command's outputs. The
/// library version and generator name are filled in automatically.
struct Manifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_digests;  // path -> hex digest
  std::map<std::string, double> timings_sec;
};

void write_manifest(const Manifest& m, const std::string& path);

}  // namespace vecmatch
