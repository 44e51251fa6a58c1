// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "sdc/error.hpp"
#include "sdc/types.hpp"
#include "sdc/valuation.hpp"

namespace sdc {

/// Geometric Brownian spot with a constant flat rate.
struct MarketModel {
  double spot0 = 100.0;
  double rate0 = 0.0;
  double volatility = 0.0;  // sigma p.a.
  double drift = 0.0;       // mu p.a.
  double tick_years = 1.0 / 252.0;
};

namespace rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based generator: the k-th draw of a stream is a pure function of
/// (seed, stream, k), so any draw can be reproduced without replaying the
/// ones before it.
///   key  = splitmix64(seed) ^ splitmix64(stream ^ 0xD1B54A32D192ED03)
///   bits = splitmix64(key + splitmix64(k))
constexpr std::uint64_t draw_bits(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t k) noexcept {
  const std::uint64_t key = splitmix64(seed) ^ splitmix64(stream ^ 0xD1B54A32D192ED03ULL);
  return splitmix64(key + splitmix64(k));
}

/// Top 53 bits mapped to the open interval (0, 1).
constexpr double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal by inverse CDF: Phi^-1(u) = -sqrt(2) erfc^-1(2u).
inline double standard_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t k) {
  const double u = to_unit_open(draw_bits(seed, stream, k));
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

}  // namespace rng

/// Stream ids used by the simulator; distinct streams never share draws.
namespace streams {
inline constexpr std::uint64_t kPath = 0;
inline constexpr std::uint64_t kCalibration = 1;
inline constexpr std::uint64_t kValidation = 2;
}  // namespace streams

/// Snapshots at start, start+1, ..., start+ticks:
///   S_{k+1} = S_k exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z_k)
/// with Z_k the k-th draw of the path stream and the rate held at r0.
inline std::vector<MarketSnapshot> generate_path(const MarketModel& model, std::uint64_t seed,
                                                 Tick ticks, Tick start = 0) {
  if (ticks < 1) throw Error(Errc::InvalidArgument, "path needs at least one tick");
  if (!(model.spot0 > 0.0)) throw Error(Errc::InvalidArgument, "initial spot must be positive");
  const double dt = model.tick_years;
  const double drift = (model.drift - 0.5 * model.volatility * model.volatility) * dt;
  const double diffusion = model.volatility * std::sqrt(dt);
  std::vector<MarketSnapshot> path;
  path.reserve(static_cast<std::size_t>(ticks) + 1);
  double spot = model.spot0;
  path.push_back({start, model.rate0, spot});
  for (Tick k = 0; k < ticks; ++k) {
    const double z =
        diffusion == 0.0 ? 0.0 : rng::standard_normal(seed, streams::kPath, static_cast<std::uint64_t>(k));
    spot *= std::exp(drift + diffusion * z);
    path.push_back({start + k + 1, model.rate0, spot});
  }
  return path;
}

}  // namespace sdc
