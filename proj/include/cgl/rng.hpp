// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace cgl {

/// Seeded random stream with platform-independent derived distributions.
///
/// The standard library's distribution objects are implementation-defined, so
/// every draw here is built directly on the raw 64-bit engine output. Streams
/// for different purposes (parameter init, batch order, ...) are derived from
/// one run seed plus a tag so they never interfere with each other.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : Rng(seed, "") {}
  Rng(std::uint64_t seed, std::string_view stream);

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cgl
