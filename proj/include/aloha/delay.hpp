#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "aloha/errors.hpp"

namespace aloha {

// Why a delay is infinite.
enum class InfinityReason {
  UnstableQueue,         // offered load lambda * E[X] >= 1
  DivergentSecondMoment, // G''_X0(1) infinite (q <= sqrt(1 - p) with K = inf)
  UndesiredStablePoint,  // network operates at p_A
};

inline std::string_view to_string(InfinityReason r) {
  switch (r) {
  case InfinityReason::UnstableQueue:
    return "unstable queue (rho >= 1)";
  case InfinityReason::DivergentSecondMoment:
    return "divergent second moment (q <= sqrt(1-p))";
  case InfinityReason::UndesiredStablePoint:
    return "undesired stable point p_A";
  }
  return "infinite";
}

// A mean delay in slots, or a marker saying it is infinite and why. The
// marker never turns into a floating-point infinity.
class Delay {
public:
  static Delay finite(double slots) { return Delay(slots, InfinityReason::UnstableQueue); }
  static Delay infinite(InfinityReason why) { return Delay(std::nullopt, why); }

  bool is_finite() const noexcept { return value_.has_value(); }
  double value() const {
    if (!value_) throw DomainError(std::string("delay is infinite: ") + std::string(to_string(reason_)));
    return *value_;
  }
  InfinityReason reason() const noexcept { return reason_; }

private:
  Delay(std::optional<double> v, InfinityReason r) : value_(v), reason_(r) {}
  std::optional<double> value_;
  InfinityReason reason_;
};

} // namespace aloha
