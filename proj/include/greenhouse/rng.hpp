#pragma once

#include <cstdint>
#include <random>

namespace greenhouse {

// Stateless mixer used to derive independent stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic RNG wrapper. Only the engine comes from the standard library;
// all value mappings are written out here so streams are reproducible across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Symmetric uniform in [-1, 1].
  double jitter() { return 2.0 * uniform() - 1.0; }

  // Unbiased index in [0, n) via rejection.
  std::size_t index(std::size_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return static_cast<std::size_t>(v % n);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace greenhouse
