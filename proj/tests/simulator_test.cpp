#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "aloha/errors.hpp"
#include "aloha/fixed_point.hpp"
#include "aloha/lambert_w.hpp"
#include "aloha/moments.hpp"
#include "aloha/sim/simulator.hpp"

using namespace aloha;
using namespace aloha::sim;

namespace {

SimConfig config(int n, double lambda_hat, BackoffPolicy policy, std::int64_t slots = 200'000,
                 std::uint64_t seed = 1) {
  SimConfig c{.scenario = Scenario::from_aggregate(n, lambda_hat, std::move(policy))};
  c.slots = slots;
  c.warmup = slots / 10;
  c.seed = seed;
  return c;
}

const double kRobust = 1.0 - kInvE;

} // namespace

TEST(Simulator, SingleNodeNeverWaits) {
  for (const auto &p : {BackoffPolicy::probability(0.3, CutoffPhase::finite(3)),
                        BackoffPolicy::window(0.5, CutoffPhase::unbounded(), true)}) {
    auto c = config(1, 0.5, p, 100'000);
    c.phase_cap = 40; // keeps 2/q^i - 1 representable at q = 0.5
    const auto m = run(c);
    EXPECT_EQ(*m.p_empirical, 1.0);
    EXPECT_EQ(*m.mean_access_delay, 1.0);
    EXPECT_EQ(*m.mean_queueing_delay, 1.0);
    EXPECT_NEAR(m.throughput, 0.5, 0.01);
  }
}

TEST(Simulator, Deterministic) {
  auto c = config(30, 0.25, BackoffPolicy::window(kRobust, CutoffPhase::finite(6), true), 100'000, 42);
  const auto a = run(c);
  const auto b = run(c);
  EXPECT_EQ(a.departures, b.departures);
  EXPECT_EQ(a.attempts, b.attempts);
  EXPECT_EQ(*a.mean_queueing_delay, *b.mean_queueing_delay);
  EXPECT_EQ(a.phase_occupancy, b.phase_occupancy);
  c.seed = 43;
  EXPECT_NE(run(c).attempts, a.attempts);
}

TEST(Simulator, ConservationMonitor) {
  for (bool window : {false, true}) {
    auto c = config(20, 0.3, window ? BackoffPolicy::window(kRobust, CutoffPhase::finite(5), true)
                                    : BackoffPolicy::probability(kRobust, CutoffPhase::finite(5)),
                    50'000);
    c.monitors.conservation = true;
    const auto m = run(c);
    EXPECT_LE(m.departures, m.arrivals + m.queued_end);
  }
}

TEST(Simulator, ChannelRecount) {
  auto c = config(15, 0.3, BackoffPolicy::probability(0.5, CutoffPhase::finite(4)), 30'000);
  std::int64_t prev_departures = 0;
  std::int64_t prev_slot = -1;
  std::int64_t checked = 0;
  c.slot_observer = [&](const SlotRecord &r) {
    EXPECT_GT(r.slot, prev_slot);
    EXPECT_EQ(r.success, r.transmitters.size() == 1);
    EXPECT_EQ(r.departures_total - prev_departures, r.success ? 1 : 0);
    EXPECT_EQ(r.arrivals_total, r.departures_total + r.queued_total);
    std::vector<int> ids(r.transmitters.begin(), r.transmitters.end());
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
    prev_departures = r.departures_total;
    prev_slot = r.slot;
    ++checked;
  };
  run(c);
  EXPECT_GT(checked, 1000);
}

TEST(Simulator, LowLoad) {
  for (const auto &p : {BackoffPolicy::probability(kRobust, CutoffPhase::finite(10)),
                        BackoffPolicy::probability(kRobust, CutoffPhase::unbounded()),
                        BackoffPolicy::window(kRobust, CutoffPhase::finite(10), true),
                        BackoffPolicy::probability(0.5, CutoffPhase::finite(1))}) {
    const auto m = run(config(100, 0.01, p, 300'000));
    EXPECT_GE(*m.mean_access_delay, 1.0);
    EXPECT_LE(*m.mean_access_delay, 1.2) << p.describe();
    EXPECT_GE(*m.p_empirical, 0.98) << p.describe();
    EXPECT_EQ(m.verdict, SimVerdict::Converged);
  }
}

TEST(Simulator, DelayOrdering) {
  const auto m = run(config(50, 0.2, BackoffPolicy::probability(kRobust, CutoffPhase::finite(8))));
  EXPECT_GE(*m.mean_queueing_delay, *m.mean_access_delay);
  EXPECT_GE(*m.mean_access_delay, 1.0);
  EXPECT_LE(m.throughput, 1.0);
  EXPECT_GE(*m.p_empirical, 0.0);
  EXPECT_LE(*m.p_empirical, 1.0);
  EXPECT_NEAR(m.throughput, 0.2, 0.01);
}

TEST(Simulator, AttemptRateAtIdle) {
  auto c = config(10, 0.001, BackoffPolicy::probability(0.5, CutoffPhase::finite(2)), 20'000);
  c.monitors.attempt_rate = true;
  c.monitors.record_attempt_rate_series = true;
  const auto m = run(c);
  ASSERT_TRUE(m.attempt_rate);
  const auto &s = m.attempt_rate->series;
  ASSERT_EQ(static_cast<std::int64_t>(s.size()), m.measured_slots);
  EXPECT_NEAR(*std::min_element(s.begin(), s.end()), 0.001, 1e-15);
}

TEST(Simulator, AttemptRateBoundHolds) {
  const int n = 20;
  auto c = config(n, 0.3, BackoffPolicy::window(1.0 / n, CutoffPhase::finite(1), true), 200'000);
  c.monitors.attempt_rate = true;
  const auto m = run(c);
  ASSERT_TRUE(m.attempt_rate->theorem_applies);
  EXPECT_LE(m.attempt_rate->max_rate, m.attempt_rate->bound);
  EXPECT_EQ(m.attempt_rate->slots_checked, m.measured_slots);
}

TEST(Simulator, AttemptRateViolationAborts) {
  // q far above -ln(p_S)/n: the theorem does not apply, so nothing throws.
  auto c = config(20, 0.3, BackoffPolicy::probability(0.5, CutoffPhase::finite(1)), 20'000);
  c.monitors.attempt_rate = true;
  const auto m = run(c);
  EXPECT_FALSE(m.attempt_rate->theorem_applies);
}

TEST(Simulator, ResidualCounterIsTriangular) {
  auto c = config(20, 0.3, BackoffPolicy::window_explicit(0.5, {1, 16}), 400'000);
  c.monitors.residual = true;
  const auto m = run(c);
  ASSERT_EQ(m.residual.count(1), 1u);
  const auto &r = m.residual.at(1);
  EXPECT_EQ(r.window, 16);
  EXPECT_GT(r.total(), 100'000);
  EXPECT_LT(r.total_variation(), 0.02);
  // request probability of the phase is pi_0 = 2/(W+1)
  EXPECT_NEAR(static_cast<double>(r.counts[0]) / r.total(), 2.0 / 17, 0.01);
}

TEST(Simulator, PhaseOccupancyHasHeavierTailThanDecoupledModel) {
  // Nodes that collide together tend to collide again, so the measured
  // success probability sits below p_L and HOL packets spend more time in
  // the high phases than the decoupled phase law predicts.
  for (bool window : {false, true}) {
    const auto p = window ? BackoffPolicy::window(kRobust, CutoffPhase::finite(6), true)
                          : BackoffPolicy::probability(kRobust, CutoffPhase::finite(6));
    const auto m = run(config(50, 0.2, p, 1'000'000));
    double total = 0;
    for (double v : m.phase_occupancy) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_LT(*m.p_empirical, solve_success_probability(0.2).p_large);
    const auto f = phase_distribution(p, solve_success_probability(0.2).p_large);
    EXPECT_GT(m.phase_occupancy.back(), f.back()) << p.describe();
  }
}

TEST(Simulator, SaturatedRunKeepsEveryNodeBusy) {
  // Two saturated nodes with K = 1 alternate between "both backlogged" and
  // "one fresh packet (sent at once) against one backlogged"; the chain has
  // pi_both = 1 / (1 + 2(1-q)) and throughput pi_both 2q(1-q) + pi_fresh (1-q).
  const double q = 0.3;
  auto c = config(2, 0.1, BackoffPolicy::probability(q, CutoffPhase::finite(1)), 400'000);
  c.saturated = true;
  const auto m = run(c);
  const double both = 1 / (1 + 2 * (1 - q));
  EXPECT_NEAR(m.throughput, both * 2 * q * (1 - q) + (1 - both) * (1 - q), 0.005);
  EXPECT_EQ(m.verdict, SimVerdict::Converged);
}

TEST(Simulator, CheckpointsAndTrace) {
  auto c = config(20, 0.2, BackoffPolicy::probability(kRobust, CutoffPhase::finite(5)), 100'000);
  c.checkpoints = 11;
  c.trace_interval = 10'000;
  int rows = 0;
  c.trace_sink = [&](const TraceRow &r) {
    EXPECT_EQ(r.slot % 10'000, 0);
    ++rows;
  };
  const auto m = run(c);
  EXPECT_EQ(m.checkpoints.size(), 11u);
  EXPECT_EQ(m.checkpoints.front().slot, c.warmup);
  EXPECT_EQ(m.checkpoints.back().slot, c.slots);
  EXPECT_EQ(rows, 10);
}

TEST(Simulator, OverloadExplodes) {
  const auto m = run(config(50, 0.45, BackoffPolicy::probability(kRobust, CutoffPhase::finite(10)), 300'000));
  EXPECT_EQ(m.verdict, SimVerdict::Exploded);
  EXPECT_LT(m.throughput, 0.4);
}

TEST(Simulator, ConfigErrors) {
  auto c = config(10, 0.1, BackoffPolicy::probability(0.5, CutoffPhase::finite(1)));
  c.warmup = c.slots;
  EXPECT_THROW(run(c), ConfigError);
  c = config(10, 0.1, BackoffPolicy::probability(0.5, CutoffPhase::unbounded()));
  c.phase_cap = 0;
  EXPECT_THROW(run(c), ConfigError);
  EXPECT_THROW(run(config(10, 0.1, BackoffPolicy::window(0.6, CutoffPhase::finite(3), false))), ConfigError);
}
