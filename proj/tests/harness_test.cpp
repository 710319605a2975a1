#include <sstream>

#include <gtest/gtest.h>

#include "aloha/errors.hpp"
#include "aloha/harness/experiment.hpp"
#include "aloha/harness/result_row.hpp"
#include "aloha/harness/runner.hpp"

using namespace aloha;
using namespace aloha::harness;

TEST(SpecFile, ParsesAllKeys) {
  std::istringstream in(R"(# Table I style grid
n = 100
lambda_hat = 0.1, 0.05   # unsorted on purpose
K = inf, 10
model = window, prob
q_rule = 1-1/e
slots = 500000
warmup = 1000
seeds = 3, 4
phase_cap = 40
out = table.csv
)");
  const auto s = parse_spec(in);
  EXPECT_EQ(s.ns, std::vector<int>{100});
  EXPECT_EQ(s.lambda_hats, (std::vector<double>{0.1, 0.05}));
  ASSERT_EQ(s.ks.size(), 2u);
  EXPECT_TRUE(s.ks[0].is_unbounded());
  EXPECT_EQ(s.models.size(), 2u);
  EXPECT_EQ(s.q_rule.kind, QRuleKind::Robust);
  EXPECT_EQ(s.slots, 500000);
  EXPECT_EQ(s.replications, 2);
  EXPECT_EQ(s.seed_list(), (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(s.phase_cap, 40);
  EXPECT_EQ(s.out, "table.csv");
  EXPECT_NO_THROW(s.validate());
}

TEST(SpecFile, Errors) {
  const auto bad = [](const char *text) {
    std::istringstream in(text);
    return parse_spec(in);
  };
  EXPECT_THROW(bad("colour = red\n"), ConfigError);
  EXPECT_THROW(bad("n = 10\nn = 20\n"), ConfigError);
  EXPECT_THROW(bad("lambda_hat = 0.1,,0.2\n"), ConfigError);
  EXPECT_THROW(bad("K = 0\n"), ConfigError);
  EXPECT_THROW(bad("model = csma\n"), ConfigError);
  EXPECT_THROW(bad("q = 1-1/e\n"), ConfigError);
  EXPECT_THROW(bad("q = 0.5\nq_rule = 1/n\n"), ConfigError);
  EXPECT_THROW(bad("just words\n"), ConfigError);
  EXPECT_THROW(bad("slots = 1e6\n"), ConfigError);
  ExperimentSpec s;
  EXPECT_THROW(s.validate(), ConfigError); // no lambda_hat
  s.lambda_hats = {1.2};
  s.ks = {CutoffPhase::finite(2)};
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_spec_file("/nonexistent/spec.txt"), IoError);
}

TEST(QRules, Resolve) {
  EXPECT_DOUBLE_EQ(QRule::parse("1/n").resolve(50, 0.2), 0.02);
  EXPECT_DOUBLE_EQ(QRule::parse("1-1/e").resolve(50, 0.2), 1 - kInvE);
  EXPECT_DOUBLE_EQ(QRule::parse("optimal_geo").resolve(50, 0.2), optimal_q_geo(50, 0.2));
  EXPECT_DOUBLE_EQ(QRule::parse("0.25").resolve(50, 0.2), 0.25);
  EXPECT_THROW(QRule::parse("2"), ConfigError);
}

TEST(Csv, RoundTrip) {
  ResultRow r;
  r.lambda_hat = 0.1;
  r.n = 100;
  r.k = CutoffPhase::unbounded();
  r.model = BackoffModel::Window;
  r.q = 1 - kInvE;
  r.ex_analytic = Cell::of(1.2345678901234567);
  r.et_analytic = Cell::inf();
  r.ex_sim = Cell::of(1.0 / 3);
  r.et_sim = Cell::of(12.5);
  r.et_sim_stderr = Cell::na();
  r.p_large = Cell::of(0.87);
  r.p_empirical = Cell::of(0.8699999999999999);
  r.verdict = "quasi-stable";
  const auto line = to_csv(r);
  EXPECT_EQ(line.find(",,"), std::string::npos);
  EXPECT_NE(line.find("INF"), std::string::npos);
  EXPECT_NE(line.find("NA"), std::string::npos);
  EXPECT_EQ(parse_csv_row(line), r);
  EXPECT_THROW(parse_csv_row("1,2,3"), ConfigError);
  EXPECT_EQ(std::count(kCsvHeader.begin(), kCsvHeader.end(), ','), 12);
}

TEST(Grid, SortedOrder) {
  ExperimentSpec s;
  s.lambda_hats = {0.2, 0.1};
  s.ks = {CutoffPhase::unbounded(), CutoffPhase::finite(12), CutoffPhase::finite(10)};
  s.models = {BackoffModel::Window, BackoffModel::Probability};
  const auto g = grid(s);
  ASSERT_EQ(g.size(), 12u);
  EXPECT_EQ(g[0].lambda_hat, 0.1);
  EXPECT_EQ(g[0].k, CutoffPhase::finite(10));
  EXPECT_EQ(g[0].model, BackoffModel::Probability);
  EXPECT_EQ(g[1].model, BackoffModel::Window);
  EXPECT_TRUE(g[5].k.is_unbounded());
  EXPECT_EQ(g[6].lambda_hat, 0.2);
}

TEST(Analyze, OptimalGeometric) {
  const double q = optimal_q_geo(50, 0.3);
  const auto a = analyze_point(Scenario::from_aggregate(50, 0.3, BackoffPolicy::probability(q, CutoffPhase::finite(1))));
  const auto md = min_delay_geo(50, 0.3);
  EXPECT_NEAR(a.ex.value(), md.access, 1e-9 * md.access);
  EXPECT_NEAR(a.et.value(), md.queueing.value(), 1e-9 * md.queueing.value());
  EXPECT_EQ(a.verdict.cls, StabilityClass::StableFiniteDelay);
}

TEST(Analyze, ExponentialAboveThreshold) {
  const auto a = analyze_point(
      Scenario::from_aggregate(100, 0.35, BackoffPolicy::probability(1 - kInvE, CutoffPhase::unbounded())));
  EXPECT_TRUE(a.et.is_inf());
  EXPECT_NE(a.infinite_because.find("lambda0"), std::string::npos);
  EXPECT_THROW(analyze_point(Scenario::from_aggregate(
                   100, 0.4, BackoffPolicy::probability(1 - kInvE, CutoffPhase::unbounded()))),
               NoStablePoint);
}

TEST(Simulate, ReplicationsAreDeterministic) {
  ExperimentSpec s;
  s.ns = {20};
  s.lambda_hats = {0.2};
  s.ks = {CutoffPhase::finite(4)};
  s.models = {BackoffModel::Probability, BackoffModel::Window};
  s.slots = 40'000;
  s.warmup = 2'000;
  s.replications = 2;
  std::ostringstream a, b;
  write_csv(a, run_simulate(s));
  write_csv(b, run_simulate(s));
  EXPECT_EQ(a.str(), b.str());
  const auto rows = run_simulate(s);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].et_sim_stderr.is_finite());
  EXPECT_TRUE(rows[0].ex_analytic.is_finite());
  EXPECT_EQ(rows[0].verdict, "converged");
}

TEST(Simulate, AboveCriticalRateLeavesAnalyticNA) {
  ExperimentSpec s;
  s.ns = {20};
  s.lambda_hats = {0.4};
  s.ks = {CutoffPhase::finite(4)};
  s.slots = 20'000;
  s.warmup = 1'000;
  s.replications = 1;
  const auto rows = run_simulate(s);
  EXPECT_TRUE(rows[0].p_large.is_na());
  EXPECT_TRUE(rows[0].et_analytic.is_na());
  EXPECT_TRUE(rows[0].et_sim_stderr.is_na());
}

TEST(Compare, TagsAndGaps) {
  ExperimentSpec s;
  s.ns = {20};
  s.lambda_hats = {0.2};
  s.ks = {CutoffPhase::unbounded()};
  s.slots = 40'000;
  s.warmup = 2'000;
  s.replications = 1;
  const auto rows = run_compare(s);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].tag, "exp-analysis-gap-expected");
  EXPECT_TRUE(rows[0].gap_et.is_finite());
  EXPECT_EQ(rows[0].analytic_verdict, "stable");
}

TEST(Sweep, AnalyticArgmax) {
  SweepOptions o;
  for (int k = 1; k <= 30; ++k) o.ks.push_back(k);
  const auto rows = run_sweep(o);
  const auto best = sweep_argmax(rows);
  EXPECT_EQ(rows[best].k, 18);
  EXPECT_FALSE(rows[best].simulated_stable.has_value());
}
