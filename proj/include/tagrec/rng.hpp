// Copyright 2026 The tagrec Authors
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

#pragma once

#include <cstdint>
#include <vector>

namespace tagrec {

// Advances `state` and returns the next splitmix64 output.  splitmix64 is
// fully specified by its constants, so sequences are identical on every
// platform and standard library.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from (seed, salt).  Used to give each
// user / phase its own stream so results do not depend on processing order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed;
  (void)splitmix64_next(s);
  s ^= 0x9e3779b97f4a7c15ULL * (salt + 0x632be59bd9b4e019ULL);
  std::uint64_t out = splitmix64_next(s);
  return out;
}

// Small deterministic PRNG over splitmix64.  Not cryptographic; only used
// for shuffles and synthetic data where cross-platform reproducibility
// matters more than statistical strength.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // Uniform draw in [0, n) without modulo bias (rejection sampling).
  // n must be positive.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t rem = (0ULL - n) % n;  // 2^64 mod n
    const std::uint64_t limit = 0ULL - rem;    // largest multiple of n
    for (;;) {
      const std::uint64_t v = next_u64();
      if (limit == 0 || v < limit) return v % n;
    }
  }

  // Uniform double in [0, 1) with 53 bits of precision.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Fisher-Yates shuffle; consumes size()-1 bounded draws.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace tagrec
