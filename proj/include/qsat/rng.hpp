// Copyright 2026 the qsat authors
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

#pragma once

#include <cassert>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>

namespace qsat {

// SplitMix64 step; used to spread one master seed into independent streams.
inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t role) {
  uint64_t state = master + 0x9e3779b97f4a7c15ULL * (role + 1);
  uint64_t a = splitmix64_next(state);
  uint64_t b = splitmix64_next(state);
  return a ^ (b << 1);
}

// mt19937_64 plus hand-rolled draws. The C++ standard pins down the engine
// but not the distributions, and reproducibility here needs both.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, bound), unbiased via rejection.
  uint64_t below(uint64_t bound) {
    assert(bound > 0);
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [lo, hi], inclusive.
  int range(int lo, int hi) {
    assert(lo <= hi);
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo) + 1));
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool flip() { return (next_u64() >> 63) != 0; }

  friend std::ostream& operator<<(std::ostream& os, const Rng& r) { return os << r.engine_; }
  friend std::istream& operator>>(std::istream& is, Rng& r) { return is >> r.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qsat
