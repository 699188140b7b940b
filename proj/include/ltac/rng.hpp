// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams (Philox4x32-10). Every draw is a pure function
// of (seed, stream tag, counter words), so results do not depend on call order
// or on which worker performs the draw.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "ltac/core.hpp"

namespace ltac::rng {

using Block = std::array<std::uint32_t, 4>;

namespace detail {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace detail

inline Block philox4x32(Block ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo(kM0, ctr[0], hi0, lo0);
    detail::mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// SplitMix64 finalizer; used to derive child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(seed ^ mix64(a + 0x1234567ull)) ^ mix64(b + 0x89ABCDEFull));
}

enum class Stream : std::uint32_t {
  placement = 1,
  shadowing = 2,
  horizon = 3,
  future = 4,
  test = 99,
};

/// One keyed stream. Draws are addressed by three 32-bit counter words; the
/// stream tag occupies the fourth.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, Stream tag)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        tag_(static_cast<std::uint32_t>(tag)) {}

  Block block(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2) const {
    return philox4x32({c0, c1, c2, tag_}, key_);
  }

  /// Two uniforms in (0, 1], each with 53 random bits.
  std::array<double, 2> uniform2(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2) const {
    const Block b = block(c0, c1, c2);
    return {to_unit(b[0], b[1]), to_unit(b[2], b[3])};
  }

  /// Standard complex normal CN(0, 1) via the Box-Muller transform:
  /// r = sqrt(-ln u1), angle = 2 pi u2, z = r (cos + i sin).
  Complex complex_normal(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2) const {
    const auto u = uniform2(c0, c1, c2);
    const double r = std::sqrt(-std::log(u[0]));
    const double a = 2.0 * std::numbers::pi * u[1];
    return {r * std::cos(a), r * std::sin(a)};
  }

  /// Standard real normal N(0, 1) (cosine branch of Box-Muller).
  double normal(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2) const {
    return std::sqrt(2.0) * complex_normal(c0, c1, c2).real();
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t tag_;
};

}  // namespace ltac::rng
