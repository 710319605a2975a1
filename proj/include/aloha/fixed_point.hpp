#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "aloha/errors.hpp"
#include "aloha/lambert_w.hpp"

namespace aloha {

// The two roots of p = exp(-lambda_hat / p). p_large is the desired stable
// point p_L, p_small the small root p_S. The natural logs are kept alongside
// because several region endpoints are -ln p_S and should not pay for a
// round trip through exp/log.
struct FixedPoint {
  double p_large;
  double p_small;
  double log_p_large;
  double log_p_small;
};

inline double fixed_point_residual(double p, double lambda_hat) {
  return std::abs(p - std::exp(-lambda_hat / p));
}

// Aggregate rates within this relative distance above 1/e are treated as the
// double root; anything larger has no real solution.
inline constexpr double kCriticalRateTolerance = 1e-14;

inline FixedPoint solve_success_probability(double lambda_hat) {
  if (!(lambda_hat > 0.0))
    throw DomainError("aggregate rate must be positive, got " + std::to_string(lambda_hat));
  if (lambda_hat > kInvE * (1.0 + kCriticalRateTolerance)) throw NoStablePoint(lambda_hat);

  // p ln p = -lambda_hat, so ln p = W(-lambda_hat) on either real branch.
  const double x = -std::min(lambda_hat, kInvE);
  const double wl = lambert_w(LambertBranch::W0, x);
  const double ws = lambert_w(LambertBranch::Wm1, x);
  return FixedPoint{std::exp(wl), std::exp(ws), wl, ws};
}

} // namespace aloha
