#pragma once

#include <array>
#include <cstdint>
#include <cmath>

namespace vecmatch {

/// Generator identifier recorded in run manifests. Bump when the stream changes.
inline constexpr const char* kRngName = "xoshiro256ss-v1";

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Derive an independent stream seed from a master seed and one or two
/// stream labels. Used for replication seeds and per-run sub-streams so
/// that parallel workers never share state.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  std::uint64_t x = master;
  std::uint64_t a = detail::splitmix64(x);
  x ^= stream * 0x9e3779b97f4a7c15ULL;
  std::uint64_t b = detail::splitmix64(x);
  x ^= index * 0xd1342543de82ef95ULL;
  std::uint64_t c = detail::splitmix64(x);
  return a ^ (b << 1) ^ c;
}

/// xoshiro256** with splitmix64 seeding. Deterministic across platforms;
/// all simulation randomness flows through this class.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = detail::splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n > 0. Rejection sampling, unbiased.
  int uniform_int(int n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % bound);
  }

  /// Standard normal via Marsaglia polar; one spare is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  /// Chi-square with integer dof as a sum of squared normals.
  double chi_square(int dof) {
    double s = 0.0;
    for (int i = 0; i < dof; ++i) {
      const double z = normal();
      s += z * z;
    }
    return s;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace vecmatch
