#pragma once

// Run-level verdicts computed from checkpoint series.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace aloha::sim {

enum class SimVerdict { Converged, QuasiStableDetected, Exploded };

inline std::string to_string(SimVerdict v) {
  switch (v) {
  case SimVerdict::Converged:
    return "converged";
  case SimVerdict::QuasiStableDetected:
    return "quasi-stable";
  case SimVerdict::Exploded:
    return "exploded";
  }
  return "?";
}

// Heuristic for a mean queueing delay that keeps climbing. Looks at the
// running (cumulative) mean delay series: the mean over its last third must
// reach `factor` times the mean over its first third, and once the series
// has risen past the midpoint of those two levels it must never fall back
// below it.
inline SimVerdict detect_quasi_stability(const std::vector<double> &running_delay,
                                         double factor = 3.0) {
  const std::size_t n = running_delay.size();
  if (n < 6) return SimVerdict::Converged;
  const std::size_t third = n / 3;
  const double first =
      std::accumulate(running_delay.begin(), running_delay.begin() + static_cast<std::ptrdiff_t>(third), 0.0) /
      static_cast<double>(third);
  const double last =
      std::accumulate(running_delay.end() - static_cast<std::ptrdiff_t>(third), running_delay.end(), 0.0) /
      static_cast<double>(third);
  if (!(first > 0.0) || last < factor * first) return SimVerdict::Converged;

  const double mid = 0.5 * (first + last);
  bool risen = false;
  for (double v : running_delay) {
    if (v >= mid) risen = true;
    else if (risen) return SimVerdict::Converged;
  }
  return risen ? SimVerdict::QuasiStableDetected : SimVerdict::Converged;
}

// Least-squares slope of (slot, queued) pairs.
template <typename CheckpointRange>
double backlog_slope(const CheckpointRange &checkpoints) {
  const std::size_t n = checkpoints.size();
  if (n < 2) return 0.0;
  double sx = 0, sy = 0;
  for (const auto &c : checkpoints) {
    sx += static_cast<double>(c.slot);
    sy += static_cast<double>(c.queued);
  }
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (const auto &c : checkpoints) {
    const double dx = static_cast<double>(c.slot) - mx;
    sxx += dx * dx;
    sxy += dx * (static_cast<double>(c.queued) - my);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

// Backlog growth above this share of the offered load means the channel
// does not carry the input: throughput falls measurably short of lambda_hat.
inline constexpr double kExplosionDriftShare = 0.02;

// Exploded: the backlog grows at a sustained rate in every quarter of the
// measured span, i.e. the channel never carries the load. A network that
// first settles and only later loses the race with its input is left to the
// quasi-stability detector.
template <typename CheckpointRange>
bool backlog_exploded(const CheckpointRange &checkpoints, double lambda_hat) {
  const std::size_t n = checkpoints.size();
  if (n < 8) return false;
  using Value = typename CheckpointRange::value_type;
  for (std::size_t quarter = 0; quarter < 4; ++quarter) {
    const std::size_t lo = (n - 1) * quarter / 4;
    const std::size_t hi = (n - 1) * (quarter + 1) / 4;
    std::vector<Value> part(checkpoints.begin() + static_cast<std::ptrdiff_t>(lo),
                            checkpoints.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    if (backlog_slope(part) <= kExplosionDriftShare * lambda_hat) return false;
  }
  return true;
}

template <typename CheckpointRange>
SimVerdict classify_run(const CheckpointRange &checkpoints, const std::vector<double> &running_delay,
                        double lambda_hat, double quasi_factor) {
  if (backlog_exploded(checkpoints, lambda_hat)) return SimVerdict::Exploded;
  return detect_quasi_stability(running_delay, quasi_factor);
}

} // namespace aloha::sim
