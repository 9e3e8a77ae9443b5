// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#pragma once

#include <cstdint>
#include <random>

#include "isac/common.hpp"

namespace isac {

// splitmix64, the standard 64-bit mixer. Used both as a tiny generator and
// as the seed-splitting rule for parallel work items.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic substream seed: child(master, k) is the documented splitting
// rule for trials, sectors, paths, ... Identical (master, k) always yields the
// same substream regardless of evaluation order or thread count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0xD1B54A32D192ED03ull * (stream + 1));
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

// Thin wrapper so every module draws randomness the same way.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return uni_(eng_); }                      // [0, 1)
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }
  double normal() { return norm_(eng_); }                      // N(0, 1)

  // Circularly symmetric complex normal with E|z|^2 = 1.
  cxd cnormal() {
    return cxd(norm_(eng_) * inv_sqrt2, norm_(eng_) * inv_sqrt2);
  }

  // Unit-magnitude complex number with uniform phase.
  cxd unit_phase() {
    double p = uniform(0.0, 2.0 * pi);
    return std::polar(1.0, p);
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(eng_);
  }

 private:
  static constexpr double inv_sqrt2 = 0.7071067811865476;
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace isac
