// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace vitr {

/// Deterministic random source. mt19937_64 is fully pinned by the standard and
/// the value mappings below avoid std::*_distribution, whose output is
/// implementation-defined, so streams are bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the spare variate is cached.
  double normal();

  /// Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  /// Independent substream derived from (seed, stream).
  Rng fork(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 step; used for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace vitr
