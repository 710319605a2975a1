#pragma once

// Service-time moments of a HOL packet under K-Exponential Backoff, the
// Geo/G/1 mean delay built from them, and the stationary phase distribution.
//
// All moments are factorial: g1 = E[Y], g2 = E[Y(Y-1)] for a phase sojourn
// Y; m1 = G'_X0(1), m2 = G''_X0(1) for the service time X.

#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "aloha/delay.hpp"
#include "aloha/errors.hpp"
#include "aloha/policy.hpp"

namespace aloha {

struct SojournMoments {
  std::vector<double> mean;              // g1_i, i = 0..K
  std::vector<double> second_factorial;  // g2_i, i = 0..K

  int cutoff() const noexcept { return static_cast<int>(mean.size()) - 1; }
};

struct ServiceMoments {
  double mean = 1.0;                     // E[X] = m1
  std::optional<double> second_factorial; // m2, absent when infinite

  bool finite_second() const noexcept { return second_factorial.has_value(); }

  // var[X] = m2 + m1 - m1^2
  std::optional<double> variance() const {
    if (!second_factorial) return std::nullopt;
    return *second_factorial + mean - mean * mean;
  }
};

namespace detail {

inline void check_p(double p) {
  if (!(p > 0.0 && p <= 1.0))
    throw DomainError("success probability must lie in (0, 1], got " + std::to_string(p));
}

// Geometric(a) on {1, 2, ...}: E[Y] = 1/a, E[Y(Y-1)] = 2(1-a)/a^2.
inline void geometric_moments(double a, double &g1, double &g2) {
  g1 = 1.0 / a;
  g2 = 2.0 * (1.0 - a) / (a * a);
}

} // namespace detail

// Per-phase sojourn moments for a finite cutoff K.
//   probability: Y_i ~ Geometric(q^i) for i < K, Geometric(p q^K) at K
//   window:      Y_i ~ Uniform{1..W_i} for i < K; at K a Geometric(p)
//                number of Uniform{1..W_K} renewals
inline SojournMoments sojourn_moments(const BackoffPolicy &policy, double p) {
  detail::check_p(p);
  if (policy.cutoff().is_unbounded())
    throw UnsupportedK("sojourn_moments needs a finite cutoff phase");
  const int k = policy.cutoff().value();

  SojournMoments s;
  s.mean.resize(static_cast<std::size_t>(k) + 1);
  s.second_factorial.resize(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    auto &g1 = s.mean[static_cast<std::size_t>(i)];
    auto &g2 = s.second_factorial[static_cast<std::size_t>(i)];
    if (policy.model() == BackoffModel::Probability) {
      const double a = std::pow(policy.q(), i) * (i == k ? p : 1.0);
      detail::geometric_moments(a, g1, g2);
    } else {
      const double w = policy.window_size(i);
      g1 = (w + 1.0) / 2.0;
      g2 = (w + 1.0) * (w - 1.0) / 3.0;
      if (i == k) {
        g1 /= p;
        g2 = g2 / p + (1.0 - p) * (w + 1.0) * (w + 1.0) / (2.0 * p * p);
      }
    }
  }
  return s;
}

// Backward recurrence from differentiating
//   G_Xi(z) = G_Yi(z) (p + (1-p) G_X{i+1}(z)),  G_XK = G_YK
// at z = 1:
//   m1_i = g1_i + (1-p) m1_{i+1}
//   m2_i = g2_i + 2 g1_i (1-p) m1_{i+1} + (1-p) m2_{i+1}
inline ServiceMoments service_moments_recurrence(const SojournMoments &s, double p) {
  const int k = s.cutoff();
  double m1 = s.mean[static_cast<std::size_t>(k)];
  double m2 = s.second_factorial[static_cast<std::size_t>(k)];
  for (int i = k - 1; i >= 0; --i) {
    const double g1 = s.mean[static_cast<std::size_t>(i)];
    const double g2 = s.second_factorial[static_cast<std::size_t>(i)];
    m2 = g2 + 2.0 * g1 * (1.0 - p) * m1 + (1.0 - p) * m2;
    m1 = g1 + (1.0 - p) * m1;
  }
  return ServiceMoments{m1, m2};
}

// Unbounded-K closed forms. Probability model:
//   m1 = 1 + (1-p)/(q-(1-p))                       requires q > 1-p
//   m2 = 2(1-p)q / ((q-(1-p))(q^2-(1-p)))           requires q > sqrt(1-p)
// The window model with W_i = 2/q^i - 1 shares m1 and scales m2 by (2+q)/3.
inline ServiceMoments service_moments_unbounded(const BackoffPolicy &policy, double p) {
  if (policy.is_window() && policy.window_rule() != WindowRule::RealValued)
    throw UnsupportedPolicy("unbounded-K window moments need W_i = 2/q^i - 1");
  const double q = policy.q();
  const double b = 1.0 - p;
  if (!(q > b))
    throw DivergentMean("mean service time diverges: q=" + std::to_string(q) +
                        " <= 1-p=" + std::to_string(b));
  ServiceMoments m;
  m.mean = 1.0 + b / (q - b);
  if (q * q > b) {
    double m2 = 2.0 * b * q / ((q - b) * (q * q - b));
    if (policy.is_window()) m2 *= (2.0 + q) / 3.0;
    m.second_factorial = m2;
  }
  return m;
}

inline ServiceMoments service_moments(const BackoffPolicy &policy, double p) {
  detail::check_p(p);
  if (policy.cutoff().is_unbounded()) return service_moments_unbounded(policy, p);
  return service_moments_recurrence(sojourn_moments(policy, p), p);
}

// Mean queueing delay of a Geo/G/1 queue (Pollaczek-Khinchine):
//   E[T] = m1 + lambda m2 / (2 (1 - lambda m1))
inline Delay pk_mean_delay(double lambda, const ServiceMoments &moments) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw DomainError("per-node rate must lie in (0, 1), got " + std::to_string(lambda));
  if (lambda * moments.mean >= 1.0) return Delay::infinite(InfinityReason::UnstableQueue);
  if (!moments.finite_second()) return Delay::infinite(InfinityReason::DivergentSecondMoment);
  return Delay::finite(moments.mean +
                       lambda * *moments.second_factorial / (2.0 * (1.0 - lambda * moments.mean)));
}

// Fraction of HOL time spent in each phase. The embedded chain visits phase
// i with f_i = p(1-p)^i (i < K) and f_K = (1-p)^K, where each attempt at
// phase K counts as a visit; a visit lasts 1/r_i slots on average with r_i
// the per-slot attempt probability. An unbounded K is truncated at phase_cap,
// whose visit mass then carries the whole tail.
inline std::vector<double> phase_distribution(const BackoffPolicy &policy, double p,
                                              int phase_cap = 64) {
  detail::check_p(p);
  const int k = policy.cutoff().effective(phase_cap);
  std::vector<double> weight(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    const double visits = i < k ? p * std::pow(1.0 - p, i) : std::pow(1.0 - p, k);
    const double holding = policy.model() == BackoffModel::Probability
                               ? 1.0 / std::pow(policy.q(), i)
                               : (policy.window_size(i) + 1.0) / 2.0;
    weight[static_cast<std::size_t>(i)] = visits * holding;
  }
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  for (auto &w : weight) w /= total;
  return weight;
}

} // namespace aloha
