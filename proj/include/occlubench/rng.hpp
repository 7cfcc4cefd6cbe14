#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

#include "occlubench/pose.hpp"

namespace occlubench {

inline constexpr uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer. Fixed across platforms; every random draw in the
/// harness funnels through it.
inline constexpr uint64_t mix64(uint64_t x) {
  x += kGoldenGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives a task seed from a base seed and a path of identifiers
/// (protocol, sigma index, run index, sequence id, joint id, ...). Any
/// task's stream is reproducible in isolation from its path alone.
inline constexpr uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
  uint64_t h = mix64(base);
  for (uint64_t v : path) h = mix64(h ^ mix64(v));
  return h;
}

/// FNV-1a 64-bit hash; used for stable sequence/config identifiers.
inline constexpr uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based random stream: word(i) is a pure function of (key, i), so
/// draws are identical no matter the order or degree of parallelism in
/// which they are evaluated.
class CounterRng {
 public:
  explicit CounterRng(uint64_t key) : key_(key) {}

  uint64_t word(uint64_t counter) const { return mix64(mix64(counter) ^ key_); }

  /// Uniform double in [0, 1).
  double uniform(uint64_t counter) const {
    return static_cast<double>(word(counter) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) via 128-bit multiply (bound << 2^64).
  uint64_t uniform_int(uint64_t counter, uint64_t bound) const {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(word(counter)) * bound) >> 64);
  }

  /// One Box-Muller pair ~ N(0, stddev^2 I2), consuming counter words
  /// 2*pair_index and 2*pair_index+1.
  Vec2 gaussian_pair(uint64_t pair_index, double stddev) const {
    const uint64_t w0 = word(2 * pair_index);
    const uint64_t w1 = word(2 * pair_index + 1);
    const double u1 = static_cast<double>((w0 >> 11) + 1) * 0x1.0p-53;  // (0,1]
    const double u2 = static_cast<double>(w1 >> 11) * 0x1.0p-53;        // [0,1)
    const double r = stddev * std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

 private:
  uint64_t key_;
};

}  // namespace occlubench
