#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace farmtreat {

// splitmix64 step; used to derive well-separated substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-style substream derivation: the (seed, stream) pair maps to a
// starting state independent of every other pair, so parallel consumers
// can be scheduled in any order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s = a ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  std::uint64_t b = splitmix64(s);
  splitmix64(s);
  return b ^ s;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t s1,
                                 std::uint64_t s2) {
  return derive_seed(derive_seed(seed, s1), s2);
}

// Deterministic generator. mt19937_64 has a standard-pinned output
// sequence; the distribution transforms below are our own, so streams are
// bit-reproducible across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Standard normal via Marsaglia's polar method; spares are cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace farmtreat
