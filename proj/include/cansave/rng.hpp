#ifndef CANSAVE_RNG_HPP
#define CANSAVE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace cansave {

inline std::uint64_t mix_bits(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent child seed; used for counter-based per-patient and
// per-replicate streams so parallel work stays reproducible.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix_bits(seed ^ mix_bits(tag + 0x632be59bd9b4e019ull));
}

// splitmix64. Self-contained so generated corpora and resampling results do
// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Multiply-shift bound; bias is negligible for n << 2^64 and the result
    // is deterministic across platforms.
    const std::uint64_t x = next_u64();
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(x) * static_cast<unsigned __int128>(n)) >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  double normal() {
    // Box-Muller; two fresh uniforms per draw keeps the stream position
    // independent of call history.
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(double rate) {
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return -std::log(u) / rate;
  }

  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 60.0) {
      const double limit = std::exp(-mean);
      int k = 0;
      double p = 1.0;
      do {
        ++k;
        p *= uniform01();
      } while (p > limit);
      return k - 1;
    }
    // Normal approximation for large means; adequate for visit-count draws.
    const int k = static_cast<int>(std::lround(mean + std::sqrt(mean) * normal()));
    return k < 0 ? 0 : k;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace cansave

#endif  // CANSAVE_RNG_HPP
