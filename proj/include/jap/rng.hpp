#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace jap {

/// Reproducible random source. The engine is std::mt19937_64 (whose output
/// sequence is fixed by the standard); seeds are scrambled with splitmix64 and
/// all draws are converted to doubles/indices by hand so that streams are
/// bit-identical across standard-library implementations.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+splitmix64/v1";

  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n) {
    // Rejection sampling on the top of the range removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  /// Seed for a named substream of `seed`; stable across versions.
  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view name,
                                   std::uint64_t counter = 0) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return splitmix64(splitmix64(seed ^ h) + counter);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace jap
