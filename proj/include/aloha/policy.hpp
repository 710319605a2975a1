#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aloha/errors.hpp"

namespace aloha {

enum class BackoffModel { Probability, Window };

inline std::string to_string(BackoffModel m) {
  return m == BackoffModel::Probability ? "prob" : "window";
}

// How window sizes W_i are derived for the window model.
enum class WindowRule {
  RealValued, // W_i = 2/q^i - 1
  Integer,    // W_i = ceil(2/q^i) - 1
  Explicit,   // user-supplied W_0..W_K
};

// Cutoff phase K: a positive integer or unbounded (K = infinity).
class CutoffPhase {
public:
  static CutoffPhase finite(int k) {
    if (k < 1) throw DomainError("cutoff phase must be >= 1, got " + std::to_string(k));
    return CutoffPhase(k);
  }
  static CutoffPhase unbounded() { return CutoffPhase(std::nullopt); }

  bool is_finite() const noexcept { return k_.has_value(); }
  bool is_unbounded() const noexcept { return !k_.has_value(); }
  int value() const {
    if (!k_) throw DomainError("cutoff phase is unbounded");
    return *k_;
  }
  // K itself when finite, otherwise the supplied cap.
  int effective(int cap) const noexcept { return k_ ? *k_ : cap; }

  std::string str() const { return k_ ? std::to_string(*k_) : std::string("inf"); }

  friend bool operator==(const CutoffPhase &, const CutoffPhase &) = default;

private:
  explicit CutoffPhase(std::optional<int> k) : k_(k) {}
  std::optional<int> k_;
};

namespace detail {

// ceil(2/q^i) - 1, tolerant of the last-bit error in 2/q^i so that exact
// powers (q = 0.5, q = 1/n) do not round up one window too far.
inline double integer_window(double q, int i) {
  const double raw = 2.0 / std::pow(q, i);
  return std::max(1.0, std::ceil(raw * (1.0 - 1e-12)) - 1.0);
}

inline double real_window(double q, int i) { return 2.0 / std::pow(q, i) - 1.0; }

} // namespace detail

// K-Exponential Backoff policy: retransmission factor q, cutoff phase K and,
// for the window model, the contention window of every phase.
class BackoffPolicy {
public:
  static BackoffPolicy probability(double q, CutoffPhase k) {
    check_q(q);
    return BackoffPolicy(BackoffModel::Probability, q, k, WindowRule::RealValued, {});
  }

  static BackoffPolicy window(double q, CutoffPhase k, bool integer_windows) {
    check_q(q);
    return BackoffPolicy(BackoffModel::Window, q, k,
                         integer_windows ? WindowRule::Integer : WindowRule::RealValued, {});
  }

  // Windows W_0..W_K given directly; K = windows.size() - 1. q is kept for
  // stability rules that are phrased in terms of the retransmission factor.
  static BackoffPolicy window_explicit(double q, std::vector<double> windows) {
    check_q(q);
    if (windows.size() < 2) throw DomainError("explicit windows need at least W_0 and W_1");
    for (double w : windows)
      if (!(w >= 1.0)) throw DomainError("window sizes must be >= 1");
    const int k = static_cast<int>(windows.size()) - 1;
    return BackoffPolicy(BackoffModel::Window, q, CutoffPhase::finite(k), WindowRule::Explicit,
                         std::move(windows));
  }

  BackoffModel model() const noexcept { return model_; }
  double q() const noexcept { return q_; }
  CutoffPhase cutoff() const noexcept { return cutoff_; }
  WindowRule window_rule() const noexcept { return rule_; }

  bool is_window() const noexcept { return model_ == BackoffModel::Window; }
  bool is_geometric() const noexcept { return cutoff_ == CutoffPhase::finite(1); }
  bool is_exponential() const noexcept { return cutoff_.is_unbounded(); }

  // W_i; only meaningful for the window model.
  double window_size(int i) const {
    switch (rule_) {
    case WindowRule::RealValued:
      return detail::real_window(q_, i);
    case WindowRule::Integer:
      return detail::integer_window(q_, i);
    case WindowRule::Explicit:
      if (i < 0 || i >= static_cast<int>(windows_.size()))
        throw DomainError("phase " + std::to_string(i) + " outside explicit windows");
      return windows_[static_cast<std::size_t>(i)];
    }
    return 1.0;
  }

  // Per-slot transmission probability of a phase-i HOL packet: q^i, or the
  // stationary request probability 2/(W_i + 1) of the window countdown.
  double attempt_probability(int i) const {
    if (model_ == BackoffModel::Probability) return std::pow(q_, i);
    return 2.0 / (window_size(i) + 1.0);
  }

  std::string describe() const {
    std::string s = to_string(model_) + "(q=" + std::to_string(q_) + ", K=" + cutoff_.str();
    if (model_ == BackoffModel::Window)
      s += rule_ == WindowRule::Integer    ? ", integer windows"
           : rule_ == WindowRule::Explicit ? ", explicit windows"
                                           : ", real windows";
    return s + ")";
  }

private:
  BackoffPolicy(BackoffModel model, double q, CutoffPhase k, WindowRule rule,
                std::vector<double> windows)
      : model_(model), q_(q), cutoff_(k), rule_(rule), windows_(std::move(windows)) {}

  static void check_q(double q) {
    if (!(q > 0.0 && q <= 1.0))
      throw DomainError("retransmission factor q must lie in (0, 1], got " + std::to_string(q));
  }

  BackoffModel model_;
  double q_;
  CutoffPhase cutoff_;
  WindowRule rule_;
  std::vector<double> windows_;
};

// One network instance: n nodes, each with Bernoulli(lambda) arrivals.
class Scenario {
public:
  Scenario(int n, double lambda, BackoffPolicy policy)
      : Scenario(n, lambda, n * lambda, std::move(policy)) {}

  // Keeps lambda_hat exactly as given; lambda = lambda_hat / n.
  static Scenario from_aggregate(int n, double lambda_hat, BackoffPolicy policy) {
    if (n < 1) throw DomainError("node count must be >= 1");
    return Scenario(n, lambda_hat / n, lambda_hat, std::move(policy));
  }

  int n() const noexcept { return n_; }
  double lambda() const noexcept { return lambda_; }
  double lambda_hat() const noexcept { return lambda_hat_; }
  const BackoffPolicy &policy() const noexcept { return policy_; }

private:
  Scenario(int n, double lambda, double lambda_hat, BackoffPolicy policy)
      : n_(n), lambda_(lambda), lambda_hat_(lambda_hat), policy_(std::move(policy)) {
    if (n < 1) throw DomainError("node count must be >= 1");
    if (!(lambda > 0.0 && lambda < 1.0))
      throw DomainError("per-node rate must lie in (0, 1), got " + std::to_string(lambda));
  }

  int n_;
  double lambda_;
  double lambda_hat_;
  BackoffPolicy policy_;
};

} // namespace aloha
