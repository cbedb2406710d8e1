#ifndef CIDS_RNG_HPP
#define CIDS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cids {

// Deterministic RNG used everywhere in place of the std distribution objects,
// whose output is implementation-defined and would break byte-identical reruns.
// The engine is the standardized mt19937_64; the transforms below are fixed here.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // Uniform integer in [0, n).
  int below(int n) {
    int v = static_cast<int>(uniform() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
  }

  // k distinct indices from [0, n), in ascending order (Floyd's algorithm).
  std::vector<int> sample_without_replacement(int n, int k);

  // Derived stream with an independent-looking seed (splitmix64 of the
  // construction seed and a stream tag). Gives env noise, behavior actions and
  // net inits their own deterministic streams regardless of draw counts.
  Rng fork(std::uint64_t stream) const {
    std::uint64_t z = seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cids

#endif
