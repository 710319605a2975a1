#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace aloha::sim {

using Engine = std::mt19937_64;

// Independent stream for one node of one replication.
inline Engine node_stream(std::uint64_t seed, std::uint64_t node_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(node_id), static_cast<std::uint32_t>(node_id >> 32),
                    0x5a17edu};
  return Engine(seq);
}

// Uniform on (0, 1].
inline double open_unit(Engine &rng) {
  return 1.0 - std::generate_canonical<double, std::numeric_limits<double>::digits>(rng);
}

// Number of failures before the first success of Bernoulli(a) trials.
// Written out instead of std::geometric_distribution because a can be as
// small as q^64 and log(1 - a) must be taken as log1p(-a).
inline std::int64_t geometric_failures(Engine &rng, double a) {
  if (a >= 1.0) return 0;
  const double k = std::floor(std::log(open_unit(rng)) / std::log1p(-a));
  constexpr double kMax = 4.0e18;
  return k < kMax ? static_cast<std::int64_t>(k) : static_cast<std::int64_t>(kMax);
}

// Uniform on {0, ..., w - 1}.
inline std::int64_t uniform_below(Engine &rng, std::int64_t w) {
  if (w <= 1) return 0;
  return std::uniform_int_distribution<std::int64_t>(0, w - 1)(rng);
}

} // namespace aloha::sim
