// Copyright 2026 The mast-cpp Authors. All Rights Reserved.
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

#ifndef MAST_RNG_HPP_
#define MAST_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "mast/common.hpp"

namespace mast {

// splitmix64 step; used both as a generator and to derive child seeds.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic PRNG with all distribution code hand-rolled so that results
// do not depend on the standard library implementation. One stream per
// purpose; derive sub-streams with split().
class Rng {
 public:
  explicit Rng(uint64_t seed) : s_(seed ^ 0x5851f42d4c957f2dULL) {
    // Warm up so that small seeds diverge immediately.
    next_u64();
    next_u64();
  }

  uint64_t next_u64() { return splitmix64(s_); }

  // Child stream independent of this one; `tag` distinguishes purposes.
  Rng split(uint64_t tag) {
    uint64_t t = s_ ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
    return Rng(splitmix64(t));
  }

  // Uniform integer in [0, bound) without modulo bias (bound > 0).
  uint64_t uniform_u64(uint64_t bound) {
    uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  int uniform_int(int lo, int hi_incl) {
    return lo + static_cast<int>(uniform_u64(
                    static_cast<uint64_t>(hi_incl - lo) + 1));
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, consuming two uniforms per pair; the spare is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Normal(0, sigma) resampled until within +/- 2 sigma.
  double truncated_normal(double sigma) {
    for (;;) {
      double v = normal();
      if (v >= -2.0 && v <= 2.0) return v * sigma;
    }
  }

  // k distinct values from [0, n), ascending. Partial Fisher-Yates.
  std::vector<int> sample_without_replacement(int n, int k);

  // In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_u64(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t s_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mast

#endif  // MAST_RNG_HPP_
