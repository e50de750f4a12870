#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ftsim {

// Splittable counter-hashed generator (splitmix64 core). Every trial gets an
// independent stream keyed by (master_seed, point_index, trial_index), so
// results are byte-identical for any worker count or trial interleaving.
//
// std::* distributions are implementation-defined; everything here is fully
// specified so outputs are reproducible across compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static Rng for_trial(std::uint64_t master_seed, std::uint64_t point_index,
                       std::uint64_t trial_index) {
    std::uint64_t h = fmix(master_seed + 0x9E3779B97F4A7C15ULL);
    h = fmix(h ^ (point_index + 0xBF58476D1CE4E5B9ULL));
    h = fmix(h ^ (trial_index + 0x94D049BB133111EBULL));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return next_double() < p;
  }

  // Uniform in [0,n), unbiased (rejection on the top interval).
  std::uint64_t next_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Box-Muller; consumes exactly two uniforms per call.
  double normal(double mean, double sigma) {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    return mean + sigma * r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t fmix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace ftsim
