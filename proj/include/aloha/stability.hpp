#pragma once

// Stable and delay-stable regions of the retransmission factor q, the
// quasi-stability threshold lambda_0, the undesired operating point p_A and
// a rule-based classifier for scenarios.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "aloha/closed_form.hpp"
#include "aloha/delay.hpp"
#include "aloha/errors.hpp"
#include "aloha/fixed_point.hpp"
#include "aloha/lambert_w.hpp"
#include "aloha/moments.hpp"
#include "aloha/policy.hpp"

namespace aloha {

// Interval of q values. Empty regions carry an explicit flag instead of
// lo > hi. `superset_bound` marks intervals that only bound the true region
// from outside.
struct RegionInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = false;
  bool hi_open = false;
  bool empty = false;
  bool superset_bound = false;

  static RegionInterval closed(double lo, double hi) { return make(lo, hi, false, false); }
  static RegionInterval open(double lo, double hi) { return make(lo, hi, true, true); }
  static RegionInterval make(double lo, double hi, bool lo_open, bool hi_open) {
    RegionInterval r{lo, hi, lo_open, hi_open, false, false};
    if (lo > hi || (lo == hi && (lo_open || hi_open))) r.empty = true;
    return r;
  }

  bool contains(double q) const noexcept {
    if (empty) return false;
    const bool above = lo_open ? q > lo : q >= lo;
    const bool below = hi_open ? q < hi : q <= hi;
    return above && below;
  }

  // Is every point of `inner` inside this interval?
  bool includes(const RegionInterval &inner) const noexcept {
    if (inner.empty) return true;
    if (empty) return false;
    const bool lo_ok = inner.lo > lo || (inner.lo == lo && (!lo_open || inner.lo_open));
    const bool hi_ok = inner.hi < hi || (inner.hi == hi && (!hi_open || inner.hi_open));
    return lo_ok && hi_ok;
  }

  std::string str() const {
    if (empty) return "empty";
    return std::string(lo_open ? "(" : "[") + std::to_string(lo) + ", " + std::to_string(hi) +
           (hi_open ? ")" : "]");
  }
};

namespace detail {
inline void check_nodes(int n) {
  if (n < 2) throw DomainError("region formulas need n >= 2, got " + std::to_string(n));
}
} // namespace detail

// Geometric Retransmission stable region
//   [lambda_hat (1-p_L) / (p_L (n - lambda_hat)), -ln p_S / n]
inline RegionInterval stable_region_geo(int n, double lambda_hat) {
  detail::check_nodes(n);
  const auto fp = solve_success_probability(lambda_hat);
  const double lo = lambda_hat * (1.0 - fp.p_large) / (fp.p_large * (n - lambda_hat));
  const double hi = -fp.log_p_small / n;
  return RegionInterval::closed(lo, hi);
}

// Same endpoints; the lower one is excluded because the offered load there
// is exactly one.
inline RegionInterval delay_stable_region_geo(int n, double lambda_hat) {
  auto r = stable_region_geo(n, lambda_hat);
  return RegionInterval::make(r.lo, r.hi, true, false);
}

// q* = -ln(p_S)/n = -W_{-1}(-lambda_hat)/n, the upper end of the stable region.
inline double optimal_q_geo(int n, double lambda_hat) {
  return stable_region_geo(n, lambda_hat).hi;
}

// Minimum mean access and queueing delay of Geometric Retransmission,
// attained at q = optimal_q_geo(n, lambda_hat).
inline DelayPair min_delay_geo(int n, double lambda_hat) {
  detail::check_nodes(n);
  const auto fp = solve_success_probability(lambda_hat);
  const double pl = fp.p_large;
  const double l = -fp.log_p_small;
  const double access = 1.0 + (1.0 - pl) / pl * (n / l);
  const double denom = pl * l - lambda_hat * (1.0 - pl) / (1.0 - lambda_hat / n);
  if (!(denom > 0.0)) return {access, Delay::infinite(InfinityReason::UnstableQueue)};
  return {access, Delay::finite(1.0 + n * (1.0 / denom - 1.0 / l))};
}

// Exponential Backoff stable region [1 - p_L, 1 - p_S], independent of n.
inline RegionInterval stable_region_exp(double lambda_hat) {
  const auto fp = solve_success_probability(lambda_hat);
  return RegionInterval::closed(1.0 - fp.p_large, 1.0 - fp.p_small);
}

// Outer bound (sqrt(1 - p_L), -ln p_S / (1 - ln p_S)) on the Exponential
// Backoff delay-stable region. Empty from lambda_0 upwards.
inline RegionInterval delay_stable_envelope_exp(double lambda_hat) {
  const auto fp = solve_success_probability(lambda_hat);
  const double l = -fp.log_p_small;
  auto r = RegionInterval::open(std::sqrt(1.0 - fp.p_large), l / (1.0 + l));
  r.superset_bound = true;
  return r;
}

namespace detail {
// sqrt(1 - p_L) - (-ln p_S)/(1 - ln p_S); negative below lambda_0.
inline double envelope_gap(double lambda_hat) {
  const auto fp = solve_success_probability(lambda_hat);
  const double l = -fp.log_p_small;
  return std::sqrt(1.0 - fp.p_large) - l / (1.0 + l);
}

inline double compute_lambda0() {
  double lo = 1e-6;
  double hi = kInvE;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (envelope_gap(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}
} // namespace detail

// Aggregate rate at which the delay-stable envelope closes. Computed once
// per process.
inline double lambda0() {
  static const double value = detail::compute_lambda0();
  return value;
}

inline double lambda0_residual(double lambda_hat) {
  return std::abs(detail::envelope_gap(lambda_hat));
}

struct UndesiredPoint {
  double exact;          // n(1-q)/q / W0((n/q - n) exp(n/q))
  double approximation;  // n(1-q) / (n + q ln(1-q))
  double selected;       // approximation for n >= 10, exact below
  bool node_condition;   // n > -(1+q) ln(1-q)
  bool second_moment_diverges; // q < sqrt(1 - selected)
};

inline UndesiredPoint undesired_point_pA(int n, double q) {
  detail::check_nodes(n);
  if (!(q > 0.0 && q < 1.0)) throw DomainError("undesired_point_pA needs 0 < q < 1");
  const double scale = n * (1.0 - q) / q;
  // (n/q - n) exp(n/q) overflows quickly, so hand W0 its logarithm.
  const double exact = scale / lambert_w0_from_log(std::log(scale) + n / q);
  const double approx = n * (1.0 - q) / (n + q * std::log1p(-q));
  const double selected = n >= 10 ? approx : exact;
  return UndesiredPoint{exact, approx, selected, n > -(1.0 + q) * std::log1p(-q),
                        q < std::sqrt(1.0 - selected)};
}

// Maximum stable throughput of Geometric Retransmission at a fixed q,
// n q exp(-n q).
inline double max_stable_throughput_geo_at_q(int n, double q) {
  detail::check_nodes(n);
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("q must lie in (0, 1]");
  return n * q * std::exp(-n * q);
}

struct ConstrainedThroughput {
  double lambda_hat = 0.0; // largest rate meeting the bound
  bool capped = false;     // bound never binds on (0, 1/e]; value is 1/e
  bool empty = false;      // bound fails even as lambda_hat -> 0
};

// Largest lambda_hat in (0, 1/e] such that the probability-model service
// time at p_L(lambda_hat) has G''_X0(1) < bound.
inline ConstrainedThroughput delay_constrained_max_throughput(int k, double q, double bound) {
  if (k < 1) throw DomainError("delay_constrained_max_throughput needs finite K >= 1");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("q must lie in (0, 1)");
  if (!(bound > 0.0)) throw DomainError("bound must be positive");
  const auto policy = BackoffPolicy::probability(q, CutoffPhase::finite(k));
  const auto m2_at = [&](double lambda_hat) {
    const double p = solve_success_probability(lambda_hat).p_large;
    return *service_moments(policy, p).second_factorial;
  };
  if (m2_at(kInvE) < bound) return {kInvE, true, false};
  double lo = 1e-12;
  if (!(m2_at(lo) < bound)) return {0.0, false, true};
  double hi = kInvE;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (m2_at(mid) < bound)
      lo = mid;
    else
      hi = mid;
  }
  return {lo, false, false};
}

struct BacklogThroughput {
  double p_backlogged = 0.0; // lowest root of p = exp(-n / (p E[X](p)))
  double throughput = 0.0;   // n / E[X] at that root
};

// Throughput of a network in which every node stays backlogged, in the same
// decoupled model that gives p_L: each node attempts 1/(p E[X](p)) times per
// slot, so p solves p = exp(-n / (p E[X](p))). The lowest root is the
// congested operating point; an input rate above n / E[X] there cannot be
// drained once the network has drifted into it. At K = 1 this reduces to
// about n q exp(-n q).
inline BacklogThroughput backlog_saturation_throughput(int n, const BackoffPolicy &policy) {
  detail::check_nodes(n);
  if (policy.cutoff().is_unbounded())
    throw UnsupportedK("backlog saturation throughput needs a finite cutoff phase");
  const auto h = [&](double log_p) {
    const double p = std::exp(log_p);
    return log_p + n / (p * service_moments(policy, p).mean);
  };
  // h < 0 as p -> 0 (p E[X] stays bounded) and h(1) = n > 0.
  constexpr int kSteps = 4000;
  constexpr double kLogMin = -700.0;
  double lo = kLogMin;
  if (!(h(lo) < 0.0)) throw DomainError("no congested operating point found");
  double hi = lo;
  for (int s = 1; s <= kSteps; ++s) {
    const double x = kLogMin * (1.0 - static_cast<double>(s) / kSteps);
    if (h(x) >= 0.0) {
      hi = x;
      break;
    }
    lo = x;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) < 0.0 ? lo : hi) = mid;
  }
  const double p = std::exp(0.5 * (lo + hi));
  return {p, n / service_moments(policy, p).mean};
}

struct TradeoffPoint {
  int k = 1;
  double backlog_throughput = 0.0; // robustness limit
  ConstrainedThroughput delay;     // delay-constraint limit
  double lambda_hat = 0.0;         // the smaller of the two
};

// Largest input rate that is both drained from the congested point and
// meets the second-moment bound at p_L, probability model with cutoff k.
inline TradeoffPoint delay_robustness_tradeoff(int n, int k, double q, double bound) {
  TradeoffPoint t;
  t.k = k;
  t.backlog_throughput =
      backlog_saturation_throughput(n, BackoffPolicy::probability(q, CutoffPhase::finite(k))).throughput;
  t.delay = delay_constrained_max_throughput(k, q, bound);
  t.lambda_hat = std::min(t.backlog_throughput, t.delay.lambda_hat);
  return t;
}

enum class StabilityClass { StableFiniteDelay, QuasiStable, Unstable };

inline std::string to_string(StabilityClass c) {
  switch (c) {
  case StabilityClass::StableFiniteDelay:
    return "stable";
  case StabilityClass::QuasiStable:
    return "quasi-stable";
  case StabilityClass::Unstable:
    return "unstable";
  }
  return "?";
}

struct StabilityVerdict {
  StabilityClass cls = StabilityClass::StableFiniteDelay;
  std::optional<double> p_operating; // p_L, p_A, or unknown
  std::vector<std::string> reasons;
};

// Rule-based classification:
//   Unstable     lambda_hat > 1/e, or q outside the stable region of the
//                policy kind (K = 1 or K = inf)
//   QuasiStable  Exponential Backoff with q in the undesired-point zone
//                [-ln p_S/(1-ln p_S), 1-p_S], in the divergent zone
//                [1-p_L, sqrt(1-p_L)], or lambda_hat >= lambda_0;
//                Geometric Retransmission at the lower region endpoint
//   Stable       otherwise.
// 1 < K < inf has no closed-form region; it is judged by the decoupled queue
// at p_L (offered load below one).
inline StabilityVerdict classify(const Scenario &scenario) {
  StabilityVerdict v;
  const double lambda_hat = scenario.lambda_hat();
  const auto &policy = scenario.policy();
  const double q = policy.q();

  if (lambda_hat > kInvE * (1.0 + kCriticalRateTolerance)) {
    v.cls = StabilityClass::Unstable;
    v.reasons.push_back("rate-above-1/e");
    return v;
  }
  if (scenario.n() == 1) {
    v.p_operating = 1.0;
    v.reasons.push_back("single-node");
    return v;
  }

  const auto fp = solve_success_probability(lambda_hat);
  if (policy.is_geometric()) {
    const auto region = stable_region_geo(scenario.n(), lambda_hat);
    if (!region.contains(q)) {
      v.cls = StabilityClass::Unstable;
      v.reasons.push_back("q-outside-geo-stable-region");
      return v;
    }
    v.p_operating = fp.p_large;
    if (!delay_stable_region_geo(scenario.n(), lambda_hat).contains(q)) {
      v.cls = StabilityClass::QuasiStable;
      v.reasons.push_back("q-at-geo-lower-bound");
    }
    return v;
  }

  if (policy.is_exponential()) {
    if (!stable_region_exp(lambda_hat).contains(q)) {
      v.cls = StabilityClass::Unstable;
      v.reasons.push_back("q-outside-exp-stable-region");
      return v;
    }
    const double l = -fp.log_p_small;
    const bool undesired_zone = q >= l / (1.0 + l) && q <= 1.0 - fp.p_small;
    const bool divergent_zone = q >= 1.0 - fp.p_large && q <= std::sqrt(1.0 - fp.p_large);
    const bool above_lambda0 = lambda_hat >= lambda0();
    if (undesired_zone) v.reasons.push_back("exp-undesired-point-zone");
    if (divergent_zone) v.reasons.push_back("exp-divergent-second-moment-zone");
    if (above_lambda0) v.reasons.push_back("rate-at-or-above-lambda0");
    if (undesired_zone || divergent_zone || above_lambda0) {
      v.cls = StabilityClass::QuasiStable;
      if (undesired_zone && scenario.n() >= 2) v.p_operating = undesired_point_pA(scenario.n(), q).selected;
      else v.p_operating = fp.p_large;
    } else {
      v.p_operating = fp.p_large;
      v.reasons.push_back("exp-envelope-is-outer-bound");
    }
    return v;
  }

  v.reasons.push_back("finite-K-judged-at-pL");
  v.p_operating = fp.p_large;
  const auto m = service_moments(policy, fp.p_large);
  if (scenario.lambda() * m.mean >= 1.0) {
    v.cls = StabilityClass::Unstable;
    v.reasons.push_back("offered-load-at-least-one");
    return v;
  }
  // Informational: p_L is an operating point, but a network pushed into the
  // congested point would not drain from there.
  if (policy.model() == BackoffModel::Probability &&
      lambda_hat > backlog_saturation_throughput(scenario.n(), policy).throughput)
    v.reasons.push_back("metastable-above-backlog-throughput");
  return v;
}

} // namespace aloha
