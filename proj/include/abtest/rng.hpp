#pragma once

#include <cstdint>
#include <string_view>

// Counter-based keyed randomness. Every draw is a pure function of
// (seed, key, counter), so the same user receives the same variates no matter
// where its lines sit in the stream or which thread touches them.

namespace abtest::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over the identifier bytes; the stable 64-bit key of a user id.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t keyed_bits(std::uint64_t seed, std::uint64_t key,
                                   std::uint64_t counter) {
  return mix64(mix64(mix64(seed) ^ key) + counter * kGolden);
}

// Seed for sub-stream `index` of stream family `family`, decorrelated from
// the parent seed and from other families.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t family,
                                      std::uint64_t index) {
  return mix64(keyed_bits(seed, family * 0x2545f4914f6cdd1dULL, index));
}

// Uniform in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Poisson(1) by inverse transform against the precomputed cumulative mass.
// kPoisson1Cum[17] is the largest double below 1, so the scan terminates for
// every value to_unit can produce.
inline constexpr double kPoisson1Cum[] = {
    0x1.78b56362cef38p-2, 0x1.78b56362cef38p-1, 0x1.d6e2bc3b82b06p-1,
    0x1.f6472f2e6944ap-1, 0x1.fe204beb22e9cp-1, 0x1.ffb21e77480acp-1,
    0x1.fff516e3f8e59p-1, 0x1.fffea81812296p-1, 0x1.ffffda3e9551ep-1,
    0x1.fffffc42dcc83p-1, 0x1.ffffffa9b0ba6p-1, 0x1.fffffff8db44cp-1,
    0x1.ffffffff7425ap-1, 0x1.fffffffff60f9p-1, 0x1.ffffffffff572p-1,
    0x1.fffffffffff58p-1, 0x1.ffffffffffff6p-1, 0x1.fffffffffffffp-1,
    0x1p+0,
};

inline int poisson1(std::uint64_t bits) {
  const double u = to_unit(bits);
  int k = 0;
  while (u > kPoisson1Cum[k]) ++k;
  return k;
}

}  // namespace abtest::rng
