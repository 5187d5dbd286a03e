#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace tlab {

// SplitMix64 finalizer; used for all sub-seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) {
  return mix64(seed ^ mix64(a));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  return derive_seed(seed, hash_string(purpose));
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                    Rest... rest) {
  return derive_seed(derive_seed(seed, a), b, rest...);
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t a,
                                    Rest... rest) {
  return derive_seed(derive_seed(seed, purpose), a, rest...);
}

// SplitMix64 stream. Cheap to construct, so per-item streams can be derived
// from (seed, index) without shared state. Bounded integers and doubles are
// computed here rather than through <random> distributions, whose output is
// implementation-defined; this keeps emitted bytes identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed)) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n) {
    // Lemire's nearly-divisionless method.
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

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return uniform() < p;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace tlab
