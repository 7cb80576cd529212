#pragma once

#include <cmath>
#include <cstdint>

namespace cardmatch {

// Counter-based generator built on the SplitMix64 finalizer. Every draw is a
// pure function of (seed, stream, entity, field), so streams are independent
// and adding a new field never shifts the draws of existing ones.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed + 0x9e3779b97f4a7c15ULL) ^
                 mix(stream * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL))) {
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t entity, std::uint64_t field) const {
    return mix(key_ ^ mix(entity * 0xd1342543de82ef95ULL + field));
  }

  // Uniform in [0, 1).
  double uniform(std::uint64_t entity, std::uint64_t field) const {
    return static_cast<double>(bits(entity, field) >> 11) * 0x1.0p-53;
  }

  bool bernoulli(std::uint64_t entity, std::uint64_t field, double p) const {
    return uniform(entity, field) < p;
  }

  // Standard normal via Box-Muller; consumes fields 2*field and 2*field+1.
  double normal(std::uint64_t entity, std::uint64_t field) const {
    const double u1 =
        (static_cast<double>(bits(entity, 2 * field) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform(entity, 2 * field + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t entity, std::uint64_t field,
                      std::uint64_t n) const {
    return bits(entity, field) % n;
  }

 private:
  std::uint64_t key_;
};

}  // namespace cardmatch
