#pragma once

// Closed-form mean access and queueing delays for Geometric Retransmission
// (K = 1) and Exponential Backoff (K = inf), in both backoff models.
//
// The window-model forms assume W_i = 2/q^i - 1. Their queueing delay is the
// probability-model one with the queueing excess E[T] - E[X] scaled by the
// ratio of second moments, c = 1 - p(1-q)/3 for K = 1 and c = (2+q)/3 for
// K = inf.

#include <cmath>
#include <numbers>

#include "aloha/delay.hpp"
#include "aloha/errors.hpp"
#include "aloha/lambert_w.hpp"
#include "aloha/policy.hpp"

namespace aloha {

struct DelayPair {
  double access;  // E[X]
  Delay queueing; // E[T]
};

namespace detail {

inline Delay scale_excess(double access, const Delay &queueing, double factor) {
  if (!queueing.is_finite()) return queueing;
  return Delay::finite(access + factor * (queueing.value() - access));
}

// E[X] = 1 + (1-p)/(pq); E[T] = 1 + 1/(pq - lambda(1-p)/(1-lambda)) - 1/q
inline DelayPair geometric_probability(double p, double q, double lambda) {
  const double access = 1.0 + (1.0 - p) / (p * q);
  const double denom = p * q - lambda * (1.0 - p) / (1.0 - lambda);
  if (!(denom > 0.0)) return {access, Delay::infinite(InfinityReason::UnstableQueue)};
  return {access, Delay::finite(1.0 + 1.0 / denom - 1.0 / q)};
}

// E[X] = 1 + (1-p)/(p+q-1)
// E[T] = E[X] + lambda(1-p)q / ((p+q-1-lambda q)(p+q^2-1))
inline DelayPair exponential_probability(double p, double q, double lambda) {
  const double a = p + q - 1.0;
  if (!(a > 0.0))
    throw DivergentMean("mean access delay diverges: p+q-1=" + std::to_string(a) + " <= 0");
  const double access = 1.0 + (1.0 - p) / a;
  const double load_gap = a - lambda * q;
  if (!(load_gap > 0.0)) return {access, Delay::infinite(InfinityReason::UnstableQueue)};
  const double b = p + q * q - 1.0;
  if (!(b > 0.0)) return {access, Delay::infinite(InfinityReason::DivergentSecondMoment)};
  return {access, Delay::finite(access + lambda * (1.0 - p) * q / (load_gap * b))};
}

} // namespace detail

// Dispatches on (model, K) for K = 1 or K = inf at the given success
// probability p. Agrees with pk_mean_delay(lambda, service_moments(policy, p)).
inline DelayPair closed_form_delay(const Scenario &scenario, double p) {
  const auto &policy = scenario.policy();
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("success probability must lie in (0, 1]");
  if (!policy.is_geometric() && !policy.is_exponential())
    throw UnsupportedK("closed forms exist only for K = 1 and K = inf, got K = " +
                       policy.cutoff().str());
  if (policy.is_window() && policy.window_rule() != WindowRule::RealValued)
    throw UnsupportedPolicy("window closed forms need W_i = 2/q^i - 1");

  const double q = policy.q();
  const double lambda = scenario.lambda();
  if (policy.is_geometric()) {
    auto d = detail::geometric_probability(p, q, lambda);
    if (policy.is_window())
      d.queueing = detail::scale_excess(d.access, d.queueing, 1.0 - p * (1.0 - q) / 3.0);
    return d;
  }
  auto d = detail::exponential_probability(p, q, lambda);
  if (policy.is_window()) d.queueing = detail::scale_excess(d.access, d.queueing, (2.0 + q) / 3.0);
  return d;
}

// Operating-point forms written in terms of (n, lambda_hat, p_L). They are
// the general closed forms specialised to a particular q and are kept as
// independent cross-checks.

// Geometric Retransmission at q = 1/n.
inline DelayPair geometric_delay_at_inverse_n(int n, double lambda_hat, double p_large) {
  const double access = 1.0 + n * (1.0 - p_large) / p_large;
  const double denom = p_large - lambda_hat * (1.0 - p_large) / (1.0 - lambda_hat / n);
  if (!(denom > 0.0)) return {access, Delay::infinite(InfinityReason::UnstableQueue)};
  return {access, Delay::finite(1.0 + n * (1.0 / denom - 1.0))};
}

// Window Geometric Retransmission with W_0 = 1, W_1 = 2n - 1, in the
// large-n form: the window correction on the queueing excess is taken as
// lambda_hat (1-p)/(3(1-lambda_hat/n)) where the exact P-K value carries an
// extra factor (n-1)/n. Exact values come from closed_form_delay.
inline DelayPair window_geometric_delay_at_inverse_n_large_n(int n, double lambda_hat,
                                                            double p_large) {
  const double access = 1.0 + n * (1.0 - p_large) / p_large;
  const double shrink = lambda_hat * (1.0 - p_large) / (1.0 - lambda_hat / n);
  const double denom = p_large - shrink;
  if (!(denom > 0.0)) return {access, Delay::infinite(InfinityReason::UnstableQueue)};
  return {access, Delay::finite(1.0 + n * ((1.0 - shrink / 3.0) / denom - 1.0))};
}

// Exponential Backoff at q = 1 - 1/e; window variant uses W_i = 2/q^i - 1.
inline DelayPair exponential_delay_at_robust_q(int n, double lambda_hat, double p_large,
                                               bool window_model) {
  const double e1 = kInvE;
  const double gap = p_large - e1;
  if (!(gap > 0.0)) throw DivergentMean("p_L <= 1/e: mean access delay diverges at q = 1-1/e");
  const double access = (1.0 - e1) / gap;
  const double load_gap = n * gap - lambda_hat * (1.0 - e1);
  if (!(load_gap > 0.0)) return {access, Delay::infinite(InfinityReason::UnstableQueue)};
  const double b = p_large - 2.0 * e1 + e1 * e1;
  if (!(b > 0.0)) return {access, Delay::infinite(InfinityReason::DivergentSecondMoment)};
  double excess = lambda_hat * (1.0 - p_large) * (1.0 - e1) / (load_gap * b);
  if (window_model) excess *= 1.0 - e1 / 3.0;
  return {access, Delay::finite(access + excess)};
}

} // namespace aloha
