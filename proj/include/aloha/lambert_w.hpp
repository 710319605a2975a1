#pragma once

// Real branches W0 and W-1 of the Lambert W function, the inverse of
// w -> w * exp(w).
//
// Both branches use Halley iteration from a branch-specific seed and fall
// back to bisection whenever an iterate leaves the branch's half-line.
//   W0 : root >= -1, defined for x >= -1/e
//   W-1: root <= -1, defined for -1/e <= x < 0

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "aloha/errors.hpp"

namespace aloha {

enum class LambertBranch { W0, Wm1 };

inline constexpr double kInvE = 0.36787944117144233; // exp(-1) rounded

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

// 1 + e*x, with the product fused so that values near the branch point keep
// their significant digits.
inline double branch_distance(double x) { return std::fma(std::numbers::e, x, 1.0); }

// Series around the branch point in s = +-sqrt(2(1 + e x)).
inline double branch_point_series(double s) {
  return -1.0 + s * (1.0 + s * (-1.0 / 3.0 + s * (11.0 / 72.0 + s * (-43.0 / 540.0))));
}

inline double seed_w0(double x, double d) {
  if (d < 0.25) return branch_point_series(std::sqrt(2.0 * d));
  if (std::abs(x) < 0.25) return x * (1.0 - x * (1.0 - 1.5 * x));
  if (x < 3.0) {
    const double l = std::log1p(x);
    return l * (1.0 - std::log1p(l) / (2.0 + l));
  }
  const double l1 = std::log(x);
  const double l2 = std::log(l1);
  return l1 - l2 + l2 / l1;
}

inline double seed_wm1(double x, double d) {
  if (d < 0.25) return branch_point_series(-std::sqrt(2.0 * d));
  const double l1 = std::log(-x);
  const double l2 = std::log(-l1);
  return l1 - l2 + l2 / l1;
}

inline double residual(double w, double x) { return w * std::exp(w) - x; }

// Bisection on [lo, hi] where w*e^w - x changes sign.
inline double bisect(double lo, double hi, double x) {
  double flo = residual(lo, x);
  for (int i = 0; i < 200 && hi - lo > 4 * kEps * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = residual(mid, x);
    if ((fmid < 0) == (flo < 0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double bisect_branch(LambertBranch branch, double x) {
  if (branch == LambertBranch::W0) {
    double hi = 1.0;
    while (residual(hi, x) < 0) hi *= 2.0;
    return bisect(-1.0, hi, x);
  }
  double lo = -2.0;
  while (residual(lo, x) < 0) lo *= 2.0;
  return bisect(lo, -1.0, x);
}

} // namespace detail

inline double lambert_w(LambertBranch branch, double x) {
  using detail::kEps;
  if (std::isnan(x)) throw DomainError("lambert_w: NaN argument");

  const double d = detail::branch_distance(x);
  // Within a few ulps of -1/e the branch point is the only answer
  // representable to better than sqrt(eps).
  if (std::abs(d) <= 8 * kEps) return -1.0;
  if (d < 0) throw DomainError("lambert_w: argument " + std::to_string(x) + " below -1/e");
  if (branch == LambertBranch::Wm1 && x >= 0)
    throw DomainError("lambert_w: W-1 requires -1/e <= x < 0");
  if (x == 0) return 0.0;
  if (std::isinf(x)) return x;

  double w = branch == LambertBranch::W0 ? detail::seed_w0(x, d) : detail::seed_wm1(x, d);
  const auto on_branch = [branch](double v) {
    return std::isfinite(v) && (branch == LambertBranch::W0 ? v >= -1.0 : v <= -1.0);
  };
  if (!on_branch(w)) w = branch == LambertBranch::W0 ? -1.0 + 1e-3 : -1.0 - 1e-3;

  for (int iter = 0; iter < 64; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (f == 0.0 || wp1 == 0.0) return w;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    const double next = w - f / denom;
    if (!on_branch(next)) return detail::bisect_branch(branch, x);
    const double step = std::abs(next - w);
    w = next;
    if (step <= 4 * kEps * std::max(1.0, std::abs(w))) return w;
  }
  return detail::bisect_branch(branch, x);
}

// W0(exp(log_x)) for arguments too large to form directly, by Newton
// iteration on w + ln w = log_x.
inline double lambert_w0_from_log(double log_x) {
  if (std::isnan(log_x)) throw DomainError("lambert_w0_from_log: NaN argument");
  if (log_x < 1.0) return lambert_w(LambertBranch::W0, std::exp(log_x));
  double w = log_x - std::log(log_x);
  if (w <= 0) w = 1.0;
  for (int iter = 0; iter < 64; ++iter) {
    const double f = w + std::log(w) - log_x;
    const double next = w - f / (1.0 + 1.0 / w);
    const double step = std::abs(next - w);
    w = next > 0 ? next : 0.5 * w;
    if (step <= 4 * detail::kEps * w) break;
  }
  return w;
}

} // namespace aloha
