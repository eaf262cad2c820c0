#pragma once

#include <cstdint>
#include <string_view>

namespace cotlab {

// FNV-1a over bytes; used for stable seeds derived from identifiers.
inline std::uint64_t fnv64(std::string_view data) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

// SplitMix64 finalizer. Used everywhere a seed has to be stretched or mixed.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Fixed-algorithm PRNG so every draw in the toolkit reproduces byte-for-byte
// across platforms and standard libraries (std:: distributions are
// implementation-defined and would break suite determinism).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    return mix64(z);
  }

  // Unbiased draw from [0, n), n >= 1. Lemire multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform draw from [lo, hi], inclusive on both ends.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::uint64_t state_;
};

// Seed of the index-th independent stream derived from a base seed.
// Splittable counter scheme: any prefix of streams is stable under extension.
inline std::uint64_t derive_stream_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(base + 0x9E3779B97F4A7C15ull * (index + 1));
}

// Order-sensitive combination of two seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
}

}  // namespace cotlab
