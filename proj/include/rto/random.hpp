// Copyright 2026 The RTO Authors
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

// Random stream "rto-mt64-v1".
//
// All shuffles, splits, generators and hard-label sampling draw from this one
// stream definition so that independent implementations can agree bit for bit:
//
//   engine   std::mt19937_64 seeded with the 64-bit seed (standard sequence)
//   uniform  (next() >> 11) * 2^-53, a double in [0, 1)
//   below(n) rejection sampling: draw next() until x < floor(2^64 / n) * n,
//            return x % n
//   shuffle  Fisher-Yates from the back: for i = n-1 .. 1, swap(i, below(i+1))
//   bernoulli(p) uniform() < p
//   derive(seed, index) splitmix64(seed + 0x9E3779B97F4A7C15 * (index + 1))
//
// std::uniform_*_distribution and std::shuffle are avoided because their
// output is implementation-defined.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>

namespace rto {

inline constexpr const char* kRngName = "rto-mt64-v1";

inline constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed of the index-th independent sub-stream of a master seed.
inline constexpr std::uint64_t DeriveSeed(std::uint64_t seed,
                                          std::uint64_t index) {
  return SplitMix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Next() { return engine_(); }

  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t Below(std::uint64_t n) {
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() / n * n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(Below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  // Standard normal by Box-Muller on two Uniform() draws.
  double Normal() {
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rto
