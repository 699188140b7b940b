// SPDX-License-Identifier: Apache-2.0
//
// Single-cell geometry and block-fading Rayleigh channels with distance path
// loss and log-normal shadowing. Users are static over a horizon, so each
// user's channel variance is fixed while the fading is redrawn every slice.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ltac/core.hpp"
#include "ltac/csv.hpp"
#include "ltac/rng.hpp"

namespace ltac {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Scenario {
  double corner_distance = 1000.0;  // hexagon side, m
  double reference_distance = 200.0;
  double pathloss_exponent = 3.7;
  double shadow_std_db = 8.0;
  double min_user_distance = 50.0;
  Point bs_position{};
  std::vector<Point> user_positions;

  std::vector<double> distances() const {
    std::vector<double> d;
    d.reserve(user_positions.size());
    for (const auto& p : user_positions) d.push_back(std::hypot(p.x - bs_position.x, p.y - bs_position.y));
    return d;
  }
};

struct ChannelSet {
  std::vector<CMatrix> H;  // one N x M matrix per slice
  RVector variances;       // per-user entry variance
  RVector shadow;          // per-user linear shadowing factor
  std::uint64_t seed = 0;

  int num_slices() const { return static_cast<int>(H.size()); }
  int num_users() const { return static_cast<int>(variances.size()); }
  int num_antennas() const { return H.empty() ? 0 : static_cast<int>(H.front().rows()); }
};

/// Inside test for the flat-topped hexagon of side `side` centred at the origin.
inline bool inside_hexagon(double x, double y, double side) {
  const double s3 = std::sqrt(3.0);
  const double ay = std::abs(y), ax = std::abs(x);
  return ay <= 0.5 * s3 * side && s3 * ax + ay <= s3 * side;
}

inline constexpr int kMaxPlacementAttempts = 10000;

/// Uniform user drop over the hexagon by rejection from its bounding box.
/// Users closer than `min_user_distance` to the BS are redrawn; the attempt
/// budget is shared by all users of one drop.
inline Scenario place_users(const Scenario& base, int num_users, std::uint64_t seed) {
  detail::require(num_users >= 1, "place_users: num_users must be >= 1");
  detail::require(base.corner_distance > 0, "place_users: corner_distance must be positive");
  if (base.min_user_distance >= base.corner_distance)
    throw ConfigError("place_users: min_user_distance must be below the corner distance");
  Scenario out = base;
  out.user_positions.clear();
  const double side = base.corner_distance;
  const double half_h = 0.5 * std::sqrt(3.0) * side;
  const rng::CounterStream stream(seed, rng::Stream::placement);
  std::uint32_t attempt = 0;
  for (int m = 0; m < num_users; ++m) {
    for (;;) {
      if (attempt >= kMaxPlacementAttempts)
        throw ConfigError("place_users: exceeded " + std::to_string(kMaxPlacementAttempts) +
                          " placement attempts; the cell is too small for min_user_distance");
      const auto u = stream.uniform2(attempt++, 0, 0);
      const double x = (2.0 * u[0] - 1.0) * side;
      const double y = (2.0 * u[1] - 1.0) * half_h;
      if (!inside_hexagon(x, y, side)) continue;
      if (std::hypot(x, y) < base.min_user_distance) continue;
      out.user_positions.push_back({x + base.bs_position.x, y + base.bs_position.y});
      break;
    }
  }
  return out;
}

inline double channel_variance(double distance_m, double shadow_linear, double reference_distance = 200.0,
                               double exponent = 3.7) {
  detail::require(distance_m > 0, "channel_variance: distance must be positive");
  detail::require(shadow_linear > 0, "channel_variance: shadowing factor must be positive");
  return shadow_linear * std::pow(reference_distance / distance_m, exponent);
}

/// 10 log10 of the shadowing factor of user m: N(0, shadow_std_db^2).
inline double shadowing_db(std::uint64_t seed, int m, double shadow_std_db) {
  const rng::CounterStream stream(seed, rng::Stream::shadowing);
  return shadow_std_db * stream.normal(static_cast<std::uint32_t>(m), 0, 0);
}

namespace detail {

inline CMatrix draw_slice(const rng::CounterStream& stream, const RVector& variances, int num_antennas,
                          std::uint32_t index) {
  const Eigen::Index M = variances.size();
  CMatrix H(num_antennas, M);
  for (Eigen::Index m = 0; m < M; ++m) {
    const double scale = std::sqrt(variances[m]);
    for (int a = 0; a < num_antennas; ++a)
      H(a, m) = scale * stream.complex_normal(index, static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(a));
  }
  return H;
}

}  // namespace detail

/// Draws T independent block-fading slices. Entry (antenna a, user m) of slice t
/// is sqrt(var_m) * CN(0,1) addressed by counter (t, m, a) on the horizon stream.
inline ChannelSet sample_horizon(const Scenario& scenario, int num_antennas, int num_slices, std::uint64_t seed) {
  detail::require(num_antennas >= 1 && num_slices >= 1, "sample_horizon: N and T must be >= 1");
  detail::require(!scenario.user_positions.empty(), "sample_horizon: scenario has no users");
  const auto dist = scenario.distances();
  const auto M = static_cast<Eigen::Index>(dist.size());
  ChannelSet cs;
  cs.seed = seed;
  cs.variances.resize(M);
  cs.shadow.resize(M);
  for (Eigen::Index m = 0; m < M; ++m) {
    cs.shadow[m] = std::pow(10.0, shadowing_db(seed, static_cast<int>(m), scenario.shadow_std_db) / 10.0);
    cs.variances[m] = channel_variance(dist[static_cast<std::size_t>(m)], cs.shadow[m], scenario.reference_distance,
                                       scenario.pathloss_exponent);
  }
  const rng::CounterStream stream(seed, rng::Stream::horizon);
  cs.H.reserve(static_cast<std::size_t>(num_slices));
  for (int t = 0; t < num_slices; ++t)
    cs.H.push_back(detail::draw_slice(stream, cs.variances, num_antennas, static_cast<std::uint32_t>(t)));
  return cs;
}

/// J i.i.d. channel samples from the per-user distribution. Uses its own
/// stream tag, so it never reproduces horizon draws for the same seed.
inline std::vector<CMatrix> sample_future(const RVector& variances, int num_antennas, int num_samples,
                                          std::uint64_t seed) {
  detail::require(num_samples >= 0, "sample_future: J must be >= 0");
  detail::require(num_antennas >= 1, "sample_future: N must be >= 1");
  const rng::CounterStream stream(seed, rng::Stream::future);
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(num_samples));
  for (int j = 0; j < num_samples; ++j)
    out.push_back(detail::draw_slice(stream, variances, num_antennas, static_cast<std::uint32_t>(j)));
  return out;
}

/// CSV with columns t,m,antenna,re,im (full precision so a reload is bit-exact).
inline std::string channels_to_csv(const ChannelSet& cs) {
  std::string out = csv::header_comment("channels");
  out += "t,m,antenna,re,im\n";
  for (int t = 0; t < cs.num_slices(); ++t) {
    const auto& H = cs.H[static_cast<std::size_t>(t)];
    for (Eigen::Index m = 0; m < H.cols(); ++m)
      for (Eigen::Index a = 0; a < H.rows(); ++a)
        out += std::to_string(t) + ',' + std::to_string(m) + ',' + std::to_string(a) + ',' +
               csv::exact(H(a, m).real()) + ',' + csv::exact(H(a, m).imag()) + '\n';
  }
  return out;
}

/// Inverse of channels_to_csv. Variances and shadowing are not part of the
/// file and must be supplied by the caller when needed.
inline std::vector<CMatrix> channels_from_csv(const std::string& text) {
  auto rows = csv::parse(text);
  if (!rows.empty() && !rows.front().empty() && rows.front().front() == "t") rows.erase(rows.begin());
  int T = 0, M = 0, N = 0;
  for (const auto& r : rows) {
    if (r.size() != 5) throw InvalidArgument("channels_from_csv: expected 5 columns");
    T = std::max(T, std::stoi(r[0]) + 1);
    M = std::max(M, std::stoi(r[1]) + 1);
    N = std::max(N, std::stoi(r[2]) + 1);
  }
  std::vector<CMatrix> H(static_cast<std::size_t>(T), CMatrix::Zero(N, M));
  for (const auto& r : rows)
    H[static_cast<std::size_t>(std::stoi(r[0]))](std::stoi(r[2]), std::stoi(r[1])) =
        Complex(std::stod(r[3]), std::stod(r[4]));
  return H;
}

}  // namespace ltac
