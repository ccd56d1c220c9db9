#ifndef ORBIT_INERTIA_RNG_HPP_
#define ORBIT_INERTIA_RNG_HPP_

#include <cstdint>
#include <random>

#include "orbit_inertia/spatial.hpp"

namespace orbit_inertia {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive an independent stream seed from (seed, counter). Each run owns a
/// private stream, so sweep results do not depend on scheduling.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t counter) {
  return splitmix64(splitmix64(seed) ^ splitmix64(counter * 0xd1342543de82ef95ULL + 1));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }

  Vec3 uniform_vec3(double lo = -1.0, double hi = 1.0) {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  Vec3 unit_vector() {
    for (;;) {
      const Vec3 v = uniform_vec3();
      const double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace orbit_inertia

#endif  // ORBIT_INERTIA_RNG_HPP_
