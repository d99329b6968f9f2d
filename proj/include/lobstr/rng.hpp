// Copyright 2026 The lobstr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LOBSTR_RNG_HPP_
#define LOBSTR_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

#include "lobstr/geometry.hpp"

namespace lobstr {

/// Deterministic random source. The mt19937_64 stream is standardized, and
/// all transforms are done here rather than with std:: distributions, whose
/// outputs vary between standard libraries. Same seed, same sequence,
/// everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t raw() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    // Rejection-free modulo bias is negligible for the small n used here,
    // but stay exact anyway.
    uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n + 1) % n;
    uint64_t x = gen_();
    while (x > limit) x = gen_();
    return x % n;
  }

  /// Standard normal via Box-Muller; one spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) {
    return mean + stddev * normal();
  }

  /// Uniform direction on the unit sphere.
  Vec3 unit_vector() {
    while (true) {
      Vec3 v(normal(), normal(), normal());
      double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lobstr

#endif  // LOBSTR_RNG_HPP_
