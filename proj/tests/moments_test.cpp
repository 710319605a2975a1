#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "aloha/errors.hpp"
#include "aloha/moments.hpp"
#include "oracles.hpp"

using namespace aloha;

TEST(Moments, GeometricRetransmissionByHand) {
  // X = 1 + B Y, B ~ Bernoulli(1-p), Y ~ Geometric(pq): E[X(X-1)] = 2(1-p)/(pq)^2
  for (double p : {0.2, 0.5, 0.9})
    for (double q : {0.05, 0.3, 1.0}) {
      const auto m = service_moments(BackoffPolicy::probability(q, CutoffPhase::finite(1)), p);
      EXPECT_NEAR(m.mean, 1.0 + (1.0 - p) / (p * q), 1e-12);
      EXPECT_NEAR(*m.second_factorial, 2.0 * (1.0 - p) / ((p * q) * (p * q)),
                  1e-10 * *m.second_factorial);
    }
}

TEST(Moments, WindowGeometricByHand) {
  // Phase 1 is a Geometric(p) number N of Uniform{1..W} renewals S.
  for (double p : {0.3, 0.7})
    for (double w : {3.0, 16.0, 99.0}) {
      const auto m = service_moments(BackoffPolicy::window_explicit(0.5, {1.0, w}), p);
      const double eu = (w + 1) / 2, vu = (w * w - 1) / 12;
      const double en = 1 / p, en2 = (2 - p) / (p * p);
      const double es = en * eu, es2 = en * vu + en2 * eu * eu;
      EXPECT_NEAR(m.mean, 1 + (1 - p) * es, 1e-12 * m.mean);
      EXPECT_NEAR(*m.second_factorial, (1 - p) * (es + es2), 1e-10 * *m.second_factorial);
    }
}

TEST(Moments, TruncatedRecurrenceApproachesUnbounded) {
  for (double p : {0.6, 0.8})
    for (double q : {0.8, 0.9}) {
      if (q * q <= 1 - p) continue;
      const auto inf = service_moments(BackoffPolicy::probability(q, CutoffPhase::unbounded()), p);
      const auto k200 = service_moments(BackoffPolicy::probability(q, CutoffPhase::finite(200)), p);
      EXPECT_NEAR(k200.mean, inf.mean, 1e-9 * inf.mean);
      EXPECT_NEAR(*k200.second_factorial, *inf.second_factorial, 1e-8 * *inf.second_factorial);

      const auto winf = service_moments(BackoffPolicy::window(q, CutoffPhase::unbounded(), false), p);
      const auto w200 = service_moments(BackoffPolicy::window(q, CutoffPhase::finite(200), false), p);
      EXPECT_NEAR(w200.mean, winf.mean, 1e-9 * winf.mean);
      EXPECT_NEAR(*w200.second_factorial, *winf.second_factorial, 1e-8 * *winf.second_factorial);
    }
}

TEST(Moments, MonteCarloPhaseChain) {
  struct Case {
    double p, q;
    int k;
    bool window;
  };
  for (const auto &c : {Case{0.6, 0.632, 5, false}, Case{0.5, 0.7, 3, true}, Case{0.8, 0.5, 1, false}}) {
    const auto policy = c.window ? BackoffPolicy::window(c.q, CutoffPhase::finite(c.k), true)
                                 : BackoffPolicy::probability(c.q, CutoffPhase::finite(c.k));
    std::vector<double> w;
    if (c.window)
      for (int i = 0; i <= c.k; ++i) w.push_back(policy.window_size(i));
    const auto mc = oracle::sample_service(c.p, c.q, c.k, w, 200000, 7);
    const auto m = service_moments(policy, c.p);
    EXPECT_NEAR(m.mean, mc.mean, 4 * mc.se_mean);
    EXPECT_NEAR(*m.second_factorial, mc.second_factorial, 4 * mc.se_second);
  }
}

TEST(Moments, UnboundedDivergence) {
  const auto prob = [](double q) { return BackoffPolicy::probability(q, CutoffPhase::unbounded()); };
  EXPECT_THROW(service_moments(prob(0.3), 0.5), DivergentMean);
  const auto m = service_moments(prob(0.6), 0.5); // q > 1-p but q^2 < 1-p
  EXPECT_FALSE(m.finite_second());
  EXPECT_FALSE(m.variance().has_value());
  EXPECT_THROW(service_moments(BackoffPolicy::window(0.8, CutoffPhase::unbounded(), true), 0.9),
               UnsupportedPolicy);
  EXPECT_THROW(sojourn_moments(prob(0.8), 0.9), UnsupportedK);
}

TEST(Moments, VarianceFromFactorialMoments) {
  const auto m = service_moments(BackoffPolicy::probability(0.5, CutoffPhase::finite(1)), 0.5);
  // X = 1 + B Y: var = E[X^2] - E[X]^2
  const double ey = 4, ey2 = (2 - 0.25) / (0.25 * 0.25);
  const double ex2 = 1 + 2 * 0.5 * ey + 0.5 * ey2;
  EXPECT_NEAR(*m.variance(), ex2 - m.mean * m.mean, 1e-10);
}

TEST(Moments, PollaczekKhinchine) {
  ServiceMoments m{2.0, 6.0};
  EXPECT_NEAR(pk_mean_delay(0.25, m).value(), 2.0 + 0.25 * 6.0 / (2 * 0.5), 1e-15);
  EXPECT_EQ(pk_mean_delay(0.5, m).reason(), InfinityReason::UnstableQueue);
  EXPECT_FALSE(pk_mean_delay(0.5, m).is_finite());
  ServiceMoments heavy{2.0, std::nullopt};
  EXPECT_EQ(pk_mean_delay(0.1, heavy).reason(), InfinityReason::DivergentSecondMoment);
  EXPECT_THROW(pk_mean_delay(1.0, m), DomainError);
  EXPECT_THROW(pk_mean_delay(0.1, heavy).value(), DomainError);
}

TEST(Moments, PhaseDistributionSmallCase) {
  // Visits f = (p, 1-p), mean holding (1, 1/q).
  const auto f = phase_distribution(BackoffPolicy::probability(0.5, CutoffPhase::finite(1)), 0.5);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_NEAR(f[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(f[1], 2.0 / 3, 1e-15);
}

TEST(Moments, PhaseDistributionMatchesSinglePacketRun) {
  const double p = 0.6, q = 0.632;
  for (bool window : {false, true}) {
    const auto policy = window ? BackoffPolicy::window(q, CutoffPhase::finite(5), true)
                               : BackoffPolicy::probability(q, CutoffPhase::finite(5));
    std::vector<double> w;
    if (window)
      for (int i = 0; i <= 5; ++i) w.push_back(policy.window_size(i));
    std::vector<double> time;
    oracle::sample_service(p, q, 5, w, 400'000, 11, &time);
    double total = 0;
    for (double t : time) total += t;
    const auto f = phase_distribution(policy, p);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i], time[i] / total, 0.005) << i;
  }
}

TEST(Moments, PhaseDistributionSumsToOne) {
  for (int k : {1, 3, 10}) {
    const auto f = phase_distribution(BackoffPolicy::window(0.632, CutoffPhase::finite(k), true), 0.7);
    double s = 0;
    for (double x : f) s += x;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_EQ(phase_distribution(BackoffPolicy::probability(0.9, CutoffPhase::unbounded()), 0.7, 20).size(), 21u);
}

TEST(Moments, BadSuccessProbability) {
  const auto p = BackoffPolicy::probability(0.5, CutoffPhase::finite(2));
  EXPECT_THROW(service_moments(p, 0.0), DomainError);
  EXPECT_THROW(service_moments(p, 1.5), DomainError);
}
