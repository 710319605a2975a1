#include <cmath>

#include <gtest/gtest.h>

#include "aloha/errors.hpp"
#include "aloha/lambert_w.hpp"
#include "aloha/policy.hpp"

using namespace aloha;

TEST(Policy, CutoffPhase) {
  EXPECT_EQ(CutoffPhase::finite(3).value(), 3);
  EXPECT_TRUE(CutoffPhase::unbounded().is_unbounded());
  EXPECT_EQ(CutoffPhase::unbounded().effective(64), 64);
  EXPECT_EQ(CutoffPhase::finite(5).effective(64), 5);
  EXPECT_EQ(CutoffPhase::unbounded().str(), "inf");
  EXPECT_THROW(CutoffPhase::finite(0), DomainError);
  EXPECT_THROW(CutoffPhase::unbounded().value(), DomainError);
  EXPECT_EQ(CutoffPhase::finite(2), CutoffPhase::finite(2));
  EXPECT_FALSE(CutoffPhase::finite(2) == CutoffPhase::unbounded());
}

TEST(Policy, IntegerWindowsAtExactPowers) {
  const auto p = BackoffPolicy::window(0.5, CutoffPhase::finite(10), true);
  for (int i = 0; i <= 10; ++i) EXPECT_EQ(p.window_size(i), std::pow(2.0, i + 1) - 1.0) << i;
  const auto inv = BackoffPolicy::window(1.0 / 50, CutoffPhase::finite(1), true);
  EXPECT_EQ(inv.window_size(0), 1.0);
  EXPECT_EQ(inv.window_size(1), 99.0);
}

TEST(Policy, IntegerWindowsAtRobustFactor) {
  const double q = 1.0 - kInvE;
  const auto p = BackoffPolicy::window(q, CutoffPhase::finite(20), true);
  for (int i = 0; i <= 20; ++i) {
    const double w = p.window_size(i);
    EXPECT_EQ(w, std::ceil(2.0 / std::pow(q, i)) - 1.0) << i;
    // the integer window never asks for more than q^i
    EXPECT_LE(p.attempt_probability(i), std::pow(q, i) + 1e-15) << i;
  }
  EXPECT_EQ(p.window_size(1), 3.0);
  EXPECT_EQ(p.window_size(2), 5.0);
}

TEST(Policy, RealWindowsRequestAtQPower) {
  const auto p = BackoffPolicy::window(0.7, CutoffPhase::unbounded(), false);
  for (int i = 0; i < 30; ++i) EXPECT_NEAR(p.attempt_probability(i), std::pow(0.7, i), 1e-14);
}

TEST(Policy, ExplicitWindows) {
  const auto p = BackoffPolicy::window_explicit(0.5, {1, 16});
  EXPECT_EQ(p.cutoff(), CutoffPhase::finite(1));
  EXPECT_EQ(p.window_size(1), 16.0);
  EXPECT_EQ(p.window_rule(), WindowRule::Explicit);
  EXPECT_THROW(p.window_size(2), DomainError);
  EXPECT_THROW(BackoffPolicy::window_explicit(0.5, {1}), DomainError);
  EXPECT_THROW(BackoffPolicy::window_explicit(0.5, {1, 0.5}), DomainError);
}

TEST(Policy, Kinds) {
  EXPECT_TRUE(BackoffPolicy::probability(0.1, CutoffPhase::finite(1)).is_geometric());
  EXPECT_TRUE(BackoffPolicy::probability(0.1, CutoffPhase::unbounded()).is_exponential());
  EXPECT_FALSE(BackoffPolicy::probability(0.1, CutoffPhase::finite(5)).is_exponential());
  EXPECT_THROW(BackoffPolicy::probability(0.0, CutoffPhase::finite(1)), DomainError);
  EXPECT_THROW(BackoffPolicy::probability(1.5, CutoffPhase::finite(1)), DomainError);
  EXPECT_EQ(to_string(BackoffModel::Window), "window");
}

TEST(Policy, ScenarioKeepsAggregateRate) {
  const auto s = Scenario::from_aggregate(100, kInvE, BackoffPolicy::probability(0.5, CutoffPhase::finite(3)));
  EXPECT_EQ(s.lambda_hat(), kInvE);
  EXPECT_DOUBLE_EQ(s.lambda(), kInvE / 100);
  EXPECT_THROW(Scenario(0, 0.1, BackoffPolicy::probability(0.5, CutoffPhase::finite(3))), DomainError);
  EXPECT_THROW(Scenario(10, 1.0, BackoffPolicy::probability(0.5, CutoffPhase::finite(3))), DomainError);
}
