// Copyright 2026 The Aggbag Authors. All Rights Reserved.
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

#ifndef AGGBAG_RNG_HPP_
#define AGGBAG_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "aggbag/common.hpp"

namespace aggbag {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: output i of stream s under seed k is a pure function
// of (k, s, i). Independent streams (per trial, per bag) are obtained by
// constructing with distinct stream ids, so results never depend on how work is
// split across threads.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ mix64(~stream * 0xd1b54a32d192ed03ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw Error("CounterRng::below: bound must be positive");
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double rademacher() { return ((*this)() >> 63) ? 1.0 : -1.0; }

  // Zero-centred double-exponential by inverse CDF; one uniform per draw, so
  // draws from the same stream at different scales are exact multiples.
  double laplace(double scale) {
    double u = uniform() - 0.5;
    while (u == -0.5) u = uniform() - 0.5;
    const double a = std::abs(u);
    return (u < 0 ? 1.0 : -1.0) * scale * std::log1p(-2.0 * a);
  }

  double normal() {
    // Box-Muller; the sine branch is discarded to keep the stream stateless.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// First m entries of a partial Fisher-Yates shuffle of [0, n): a uniformly
// random size-m subset in random order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m,
                                                           CounterRng& rng) {
  if (m > n) throw Error("sample_without_replacement: m > n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return idx;
}

}  // namespace aggbag

#endif  // AGGBAG_RNG_HPP_
