// Randomised checks of invariants over generated inputs. Each test draws
// from a fixed-seed generator so failures reproduce.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "aloha/closed_form.hpp"
#include "aloha/fixed_point.hpp"
#include "aloha/harness/result_row.hpp"
#include "aloha/moments.hpp"
#include "aloha/sim/simulator.hpp"
#include "aloha/stability.hpp"

using namespace aloha;

namespace {

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin() { return integer(0, 1) == 1; }
  double rate() { return uniform(1e-4, kInvE); }
};

} // namespace

TEST(Properties, FixedPointBrackets) {
  Gen g(1);
  for (int i = 0; i < 500; ++i) {
    const double lh = g.rate();
    const auto fp = solve_success_probability(lh);
    EXPECT_LT(fixed_point_residual(fp.p_large, lh), 1e-12);
    EXPECT_LT(fixed_point_residual(fp.p_small, lh), 1e-12);
    EXPECT_LE(fp.p_small, kInvE + 1e-9);
    EXPECT_GE(fp.p_large, kInvE - 1e-9);
  }
}

TEST(Properties, RegionInclusions) {
  Gen g(2);
  for (int i = 0; i < 300; ++i) {
    const double lh = g.rate();
    const int n = g.integer(2, 500);
    EXPECT_TRUE(stable_region_geo(n, lh).includes(delay_stable_region_geo(n, lh)));
    EXPECT_TRUE(stable_region_exp(lh).includes(delay_stable_envelope_exp(lh)));
    EXPECT_EQ(optimal_q_geo(n, lh), stable_region_geo(n, lh).hi);
  }
}

TEST(Properties, MomentsAreSane) {
  Gen g(3);
  for (int i = 0; i < 500; ++i) {
    const double p = g.uniform(0.05, 1.0);
    const double q = g.uniform(0.05, 1.0);
    const int k = g.integer(1, 25);
    const auto prob = service_moments(BackoffPolicy::probability(q, CutoffPhase::finite(k)), p);
    const auto win = service_moments(BackoffPolicy::window(q, CutoffPhase::finite(k), false), p);
    EXPECT_GE(prob.mean, 1.0);
    EXPECT_GE(*prob.variance(), -1e-9 * prob.mean * prob.mean);
    EXPECT_GE(*win.variance(), -1e-9 * win.mean * win.mean);
    // same mean, smaller second moment with windows of mean 1/q^i
    EXPECT_NEAR(win.mean, prob.mean, 1e-9 * prob.mean);
    EXPECT_LE(*win.second_factorial, *prob.second_factorial * (1 + 1e-12));
  }
}

TEST(Properties, ClosedFormEqualsComposition) {
  Gen g(4);
  for (int i = 0; i < 500; ++i) {
    const double p = g.uniform(0.1, 0.95);
    const bool exp_kind = g.coin();
    const double q = exp_kind ? g.uniform(1 - p + 1e-3, 1.0) : g.uniform(0.01, 1.0);
    const auto k = exp_kind ? CutoffPhase::unbounded() : CutoffPhase::finite(1);
    const auto policy = g.coin() ? BackoffPolicy::window(q, k, false) : BackoffPolicy::probability(q, k);
    const double lambda = g.uniform(1e-4, 0.05);
    const auto m = service_moments(policy, p);
    const auto pk = pk_mean_delay(lambda, m);
    const auto cf = closed_form_delay(Scenario(20, lambda, policy), p);
    EXPECT_NEAR(cf.access, m.mean, 1e-9 * m.mean);
    ASSERT_EQ(cf.queueing.is_finite(), pk.is_finite()) << policy.describe() << " p=" << p;
    if (pk.is_finite()) {
      EXPECT_NEAR(cf.queueing.value(), pk.value(), 1e-9 * pk.value());
    }
  }
}

TEST(Properties, SimulationInvariants) {
  Gen g(5);
  for (int i = 0; i < 25; ++i) {
    const int n = g.integer(1, 30);
    const double lh = g.uniform(0.01, 0.5);
    const double q = g.uniform(0.05, 1.0);
    const auto k = g.coin() ? CutoffPhase::finite(g.integer(1, 8)) : CutoffPhase::unbounded();
    const auto policy = g.coin() ? BackoffPolicy::window(q, k, true) : BackoffPolicy::probability(q, k);
    if (lh / n >= 1.0) continue;
    sim::SimConfig c{.scenario = Scenario::from_aggregate(n, lh, policy), .slots = 20'000, .warmup = 1'000,
                     .seed = static_cast<std::uint64_t>(i), .phase_cap = 20};
    c.monitors.conservation = true;
    c.slot_observer = [](const sim::SlotRecord &r) {
      ASSERT_EQ(r.success, r.transmitters.size() == 1);
      ASSERT_EQ(r.arrivals_total, r.departures_total + r.queued_total);
    };
    const auto m = sim::run(c);
    if (m.mean_queueing_delay) {
      EXPECT_GE(*m.mean_queueing_delay, *m.mean_access_delay);
      EXPECT_GE(*m.mean_access_delay, 1.0);
    }
    EXPECT_LE(m.throughput, 1.0);
    if (m.p_empirical) {
      EXPECT_GE(*m.p_empirical, 0.0);
      EXPECT_LE(*m.p_empirical, 1.0);
    }
  }
}

TEST(Properties, CsvRoundTrip) {
  Gen g(6);
  const auto cell = [&]() {
    switch (g.integer(0, 2)) {
    case 0:
      return harness::Cell::na();
    case 1:
      return harness::Cell::inf();
    default:
      return harness::Cell::of(std::ldexp(g.uniform(-1, 1), g.integer(-40, 40)));
    }
  };
  for (int i = 0; i < 300; ++i) {
    harness::ResultRow r;
    r.lambda_hat = g.uniform(0, 1);
    r.n = g.integer(1, 10000);
    r.k = g.coin() ? CutoffPhase::unbounded() : CutoffPhase::finite(g.integer(1, 60));
    r.model = g.coin() ? BackoffModel::Window : BackoffModel::Probability;
    r.q = g.uniform(0, 1);
    r.ex_analytic = cell();
    r.et_analytic = cell();
    r.ex_sim = cell();
    r.et_sim = cell();
    r.et_sim_stderr = cell();
    r.p_large = cell();
    r.p_empirical = cell();
    r.verdict = g.coin() ? "converged" : "";
    EXPECT_EQ(harness::parse_csv_row(harness::to_csv(r)), r);
  }
}
