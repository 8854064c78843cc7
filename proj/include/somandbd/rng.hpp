#pragma once
// Deterministic random primitives. std::*_distribution output is
// implementation-defined, so normals and uniforms are generated by hand to
// keep fixed-seed runs bit-identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <random>

#include "somandbd/dims.hpp"

namespace soman {

// splitmix64: cheap, well-mixed combiner for deriving per-trial seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(master ^ 0x6d626e7368616e64ULL) + splitmix64(a) * 0x100000001b3ULL + b);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller (pair cached)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    // avoid log(0)
    while (u1 <= 0.0) u1 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = two_pi * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  // complex normal with E|z|^2 = 1
  cxd cnormal() { return cxd(normal(), normal()) * 0.7071067811865475244; }

  cxd unit_phase() {
    double a = two_pi * uniform();
    return cxd(std::cos(a), std::sin(a));
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace soman
