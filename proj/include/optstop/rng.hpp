#pragma once

#include <cstdint>

namespace optstop {

// 64-bit finalizer (murmur3). Decorrelates counter-derived seeds: seeding
// streams with arithmetic progressions of the splitmix increment would make
// them shifted copies of one another.
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDULL;
  x ^= x >> 33;
  x *= 0xC4CEB9FE1A85EC53ULL;
  x ^= x >> 33;
  return x;
}

// splitmix64. Used for every randomized fixture in the project so that
// corpora and simulations are reproducible across platforms and standard
// library versions (std:: distributions are not portable bit-for-bit).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). Modulo bias is irrelevant for the tiny bounds used here.
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  // Uniform double in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace optstop
