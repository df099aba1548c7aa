#include "vecmatch/manifest.hpp"

#include <fstream>
#include <json.hpp>

#include "vecmatch/errors.hpp"
#include "vecmatch/rng.hpp"
#include "vecmatch/version.hpp"

namespace vecmatch {

std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

std::uint64_t digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const auto* p = reinterpret_cast<const unsigned char*>(buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void write_manifest(const Manifest& m, const std::string& path) {
  nlohmann::json j;
  j["command"] = m.command;
  j["version"] = kVersion;
  j["rng"] = kRngName;
  j["config"] = m.config;
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto& [k, v] : m.seeds) seeds[k] = v;
  j["seeds"] = seeds;
  j["inputs"] = m.input_digests;
  j["timings_sec"] = m.timings_sec;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace vecmatch
