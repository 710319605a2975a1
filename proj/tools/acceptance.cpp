// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here, next to each check. Pass criterion numbers as arguments to run a
// subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "aloha/closed_form.hpp"
#include "aloha/errors.hpp"
#include "aloha/fixed_point.hpp"
#include "aloha/harness/runner.hpp"
#include "aloha/moments.hpp"
#include "aloha/sim/detectors.hpp"
#include "aloha/sim/simulator.hpp"
#include "aloha/stability.hpp"
#include "oracles.hpp"

namespace {

using namespace aloha;

const double kRobustQ = 1.0 - kInvE;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Simulation cache so that cells shared between criteria run once.
struct CellResult {
  harness::SimSummary summary;
  double mean_et() const { return summary.et.value(); }
  double stderr_et() const { return summary.et_stderr.is_finite() ? summary.et_stderr.value() : 0.0; }
};

std::map<std::tuple<int, double, int, int, int, long>, CellResult> g_cache;

const CellResult &table_cell(int k, double lambda_hat, BackoffModel model, int replications,
                             long slots = 2'000'000, int n = 100) {
  const auto key = std::make_tuple(k, lambda_hat, static_cast<int>(model), replications, n, slots);
  auto it = g_cache.find(key);
  if (it != g_cache.end()) return it->second;
  harness::ExperimentSpec spec;
  spec.ns = {n};
  spec.lambda_hats = {lambda_hat};
  spec.ks = {k > 0 ? CutoffPhase::finite(k) : CutoffPhase::unbounded()};
  spec.models = {model};
  spec.slots = slots;
  spec.replications = replications;
  const auto g = harness::grid(spec).front();
  return g_cache.emplace(key, CellResult{harness::simulate_point(spec, g)}).first->second;
}

// 1 ---------------------------------------------------------------------
Outcome fixed_point() {
  Outcome o;
  const auto fp = solve_success_probability(kInvE);
  const double dev = std::max(std::abs(fp.p_large - kInvE), std::abs(fp.p_small - kInvE));
  o.require(dev < 1e-10, "double root at 1/e within 1e-10");
  double worst = 0;
  for (int i = 1; i <= 7; ++i) {
    const double lh = 0.05 * i;
    const auto r = solve_success_probability(lh);
    worst = std::max({worst, fixed_point_residual(r.p_large, lh), fixed_point_residual(r.p_small, lh)});
  }
  o.require(worst < 1e-12, "grid residual < 1e-12");
  o.detail << "|p-1/e| at 1/e = " << dev << ", max residual on 0.05..0.35 = " << worst;
  return o;
}

// 2 ---------------------------------------------------------------------
// Forward evaluation of the service moments over the phase path
// J = min(failures, K): X = Y_0 + ... + Y_J with independent sojourns.
std::pair<double, double> forward_moments(const SojournMoments &s, double p) {
  const int k = s.cutoff();
  double m1 = 0, m2 = 0;
  double sum1 = 0, sum2 = 0, cross = 0;
  for (int j = 0; j <= k; ++j) {
    const double g1 = s.mean[static_cast<std::size_t>(j)];
    cross += g1 * sum1;
    sum1 += g1;
    sum2 += s.second_factorial[static_cast<std::size_t>(j)];
    const double w = j < k ? p * std::pow(1 - p, j) : std::pow(1 - p, k);
    m1 += w * sum1;
    m2 += w * (sum2 + 2 * cross);
  }
  return {m1, m2};
}

Outcome analytic_consistency() {
  Outcome o;
  double worst_cf = 0, worst_fwd = 0, worst_geo = 0;
  int checked = 0;
  const std::vector<CutoffPhase> ks{CutoffPhase::finite(1),  CutoffPhase::finite(2),  CutoffPhase::finite(5),
                                    CutoffPhase::finite(10), CutoffPhase::finite(20), CutoffPhase::unbounded()};
  for (int pi = 1; pi <= 9; ++pi) {
    const double p = 0.1 * pi;
    for (double q : {0.05, 0.2, 0.4, 0.6, 0.8, 0.95}) {
      for (const auto &k : ks) {
        if (k.is_unbounded() && q <= 1 - p + 1e-9) continue; // outside the stable branch
        for (bool window : {false, true}) {
          const auto policy = window ? BackoffPolicy::window(q, k, false) : BackoffPolicy::probability(q, k);
          const auto m = service_moments(policy, p);
          const double lambda = std::min(0.05, 0.5 / m.mean);
          const auto pk = pk_mean_delay(lambda, m);
          if (policy.is_geometric() || policy.is_exponential()) {
            const auto cf = closed_form_delay(Scenario(50, lambda, policy), p);
            worst_cf = std::max(worst_cf, rel(cf.access, m.mean));
            if (pk.is_finite() != cf.queueing.is_finite()) {
              o.require(false, "finite/infinite mismatch at " + policy.describe());
            } else if (pk.is_finite()) {
              worst_cf = std::max(worst_cf, rel(cf.queueing.value(), pk.value()));
            }
            if (policy.is_geometric() && pk.is_finite()) {
              // the K = 1 recurrence against the textbook forms
              double ex = 1 + (1 - p) / (p * q);
              double et = 1 + 1 / (p * q - lambda * (1 - p) / (1 - lambda)) - 1 / q;
              if (window) et = ex + (1 - p * (1 - q) / 3) * (et - ex);
              worst_geo = std::max({worst_geo, rel(m.mean, ex), rel(pk.value(), et)});
            }
          }
          if (k.is_finite()) {
            const auto [f1, f2] = forward_moments(sojourn_moments(policy, p), p);
            worst_fwd = std::max({worst_fwd, rel(f1, m.mean), rel(f2, *m.second_factorial)});
          }
          ++checked;
        }
      }
    }
  }
  o.require(worst_cf < 1e-9, "closed forms vs P-K composition < 1e-9");
  o.require(worst_fwd < 1e-9, "recurrence vs forward phase-path sum < 1e-9");
  o.require(worst_geo < 1e-10, "K=1 recurrence vs closed forms < 1e-10");
  o.detail << checked << " points; max rel diff closed-form " << worst_cf << ", forward " << worst_fwd
           << ", K=1 " << worst_geo;
  return o;
}

// 3 ---------------------------------------------------------------------
Outcome moment_oracle() {
  Outcome o;
  std::mt19937_64 pick(2024);
  std::uniform_real_distribution<double> up(0.3, 0.95), uq(0.3, 0.95);
  const int ks[] = {1, 2, 5, 10, 20};
  double worst_z = 0;
  for (int t = 0; t < 10; ++t) {
    // The standard error of the E[X(X-1)] estimate is only trustworthy when
    // the fourth moment is dominated by the early phases, (1-p) < q^4.
    // Beyond that the sample misses the rare deep phases that carry the
    // second moment and the z-score is meaningless.
    double p, q;
    do {
      p = up(pick);
      q = uq(pick);
    } while (1 - p >= std::pow(q, 4));
    const int k = ks[pick() % 5];
    const bool window = pick() % 2 == 1;
    const auto policy = window ? BackoffPolicy::window(q, CutoffPhase::finite(k), true)
                               : BackoffPolicy::probability(q, CutoffPhase::finite(k));
    std::vector<double> w;
    if (window)
      for (int i = 0; i <= k; ++i) w.push_back(policy.window_size(i));
    const auto mc = oracle::sample_service(p, q, k, w, 1'000'000, 100 + static_cast<std::uint64_t>(t));
    const auto m = service_moments(policy, p);
    const double z1 = std::abs(m.mean - mc.mean) / mc.se_mean;
    const double z2 = std::abs(*m.second_factorial - mc.second_factorial) / mc.se_second;
    worst_z = std::max({worst_z, z1, z2});
    if (z1 > 3 || z2 > 3) {
      std::ostringstream s;
      s << policy.describe() << " p=" << p << " z=(" << z1 << "," << z2 << ")";
      o.require(false, s.str());
    }
  }
  o.detail << "10 tuples x 1e6 services, worst |z| = " << worst_z << " (limit 3)";
  return o;
}

// 4 ---------------------------------------------------------------------
Outcome threshold() {
  Outcome o;
  const double l0 = lambda0();
  o.require(l0 > 0.29 && l0 < 0.31, "lambda_0 in (0.29, 0.31)");
  o.require(lambda0_residual(l0) < 1e-9, "residual < 1e-9");
  o.detail << "lambda_0 = " << l0 << ", residual " << lambda0_residual(l0);
  return o;
}

// 5 ---------------------------------------------------------------------
Outcome table_one() {
  Outcome o;
  const double rates[] = {0.05, 0.1, 0.15, 0.2, 0.25};
  const double paper[] = {1.2, 1.5, 2.1, 3.4, 7.3};
  o.detail << "K=10:";
  for (int i = 0; i < 5; ++i) {
    const auto &c = table_cell(10, rates[i], BackoffModel::Probability, 5);
    const double et = c.mean_et();
    o.detail << ' ' << rates[i] << "->" << et;
    o.require(rel(et, paper[i]) <= 0.15, "K=10 lambda_hat=" + std::to_string(rates[i]) + " within 15%");
  }
  const auto &k12 = table_cell(12, 0.3, BackoffModel::Probability, 10);
  o.detail << "; K=12 0.3 -> " << k12.mean_et() << " +- " << k12.stderr_et() << " (10 reps)";
  o.require(rel(k12.mean_et(), 39.0) <= 0.30, "K=12 lambda_hat=0.3 within 30% of 39");

  // Collapse at K=10, 0.3 is a rare event (roughly once per 5e7 slots), so
  // this needs horizons well beyond the default.
  constexpr long kLongHorizon = 100'000'000;
  constexpr int kLongRuns = 3;
  int detected = 0;
  o.detail << "; K=10 0.3 over " << kLongRuns << "x1e8 slots:";
  for (int r = 1; r <= kLongRuns; ++r) {
    sim::SimConfig cfg{.scenario = Scenario::from_aggregate(
                           100, 0.3, BackoffPolicy::probability(kRobustQ, CutoffPhase::finite(10))),
                       .slots = kLongHorizon,
                       .warmup = 100'000,
                       .seed = static_cast<std::uint64_t>(r)};
    const auto m = sim::run(std::move(cfg));
    const auto d = sim::detect_quasi_stability(m.running_queueing_delay());
    if (d == sim::SimVerdict::QuasiStableDetected) ++detected;
    o.detail << " seed" << r << "=" << sim::to_string(d) << "(run " << sim::to_string(m.verdict) << ", ET "
             << m.mean_queueing_delay.value_or(-1) << ")";
  }
  o.require(detected * 2 > kLongRuns, "K=10 lambda_hat=0.3 quasi-stable in a majority of long runs");
  return o;
}

// 6 ---------------------------------------------------------------------
Outcome table_two() {
  Outcome o;
  const auto &w20 = table_cell(20, 0.25, BackoffModel::Window, 10);
  o.detail << "window K=20 0.25 -> " << w20.mean_et() << " +- " << w20.stderr_et();
  o.require(rel(w20.mean_et(), 6.2) <= 0.15, "window K=20 lambda_hat=0.25 within 15% of 6.2");
  const auto &w12 = table_cell(12, 0.3, BackoffModel::Window, 10);
  o.detail << "; window K=12 0.3 -> " << w12.mean_et() << " +- " << w12.stderr_et();
  o.require(rel(w12.mean_et(), 25.6) <= 0.30, "window K=12 lambda_hat=0.3 within 30% of 25.6");

  // Finite cells of the table. "Not above" is tested with the replication
  // noise: window <= prob + 3 combined standard errors.
  const std::vector<std::pair<int, std::vector<double>>> cells{
      {10, {0.05, 0.1, 0.15, 0.2, 0.25}},
      {12, {0.05, 0.1, 0.15, 0.2, 0.25, 0.3}},
      {20, {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35}}};
  int n_cells = 0, strictly_below = 0;
  for (const auto &[k, rates] : cells)
    for (double lh : rates) {
      const int reps = lh >= 0.3 ? 10 : 5;
      const auto &w = table_cell(k, lh, BackoffModel::Window, lh == 0.25 && k == 20 ? 10 : reps);
      const auto &p = table_cell(k, lh, BackoffModel::Probability, (lh == 0.3 && k == 12) ? 10 : reps);
      const double slack = 3 * std::hypot(w.stderr_et(), p.stderr_et());
      ++n_cells;
      if (w.mean_et() < p.mean_et()) ++strictly_below;
      if (!(w.mean_et() <= p.mean_et() + slack)) {
        std::ostringstream s;
        s << "window " << w.mean_et() << " > prob " << p.mean_et() << " + " << slack << " at K=" << k
          << " lambda_hat=" << lh;
        o.require(false, s.str());
      }
    }
  o.detail << "; window <= prob at " << n_cells << " cells (" << strictly_below << " strictly below)";
  return o;
}

// 7 ---------------------------------------------------------------------
Outcome geometric_optimum() {
  Outcome o;
  std::map<std::pair<int, double>, double> et_sim;
  for (int n : {50, 100})
    for (double lh : {0.1, 0.2, 0.3}) {
      const double q = optimal_q_geo(n, lh);
      harness::ExperimentSpec spec;
      spec.ns = {n};
      spec.lambda_hats = {lh};
      spec.ks = {CutoffPhase::finite(1)};
      spec.q_rule = harness::QRule::fixed(q);
      spec.replications = 3;
      const auto s = harness::simulate_point(spec, harness::grid(spec).front());
      const auto md = min_delay_geo(n, lh);
      const double ex = s.ex.value(), et = s.et.value();
      et_sim[{n, lh}] = et;
      o.detail << " n=" << n << ",l=" << lh << ": EX " << ex << "/" << md.access << " ET " << et << "/"
               << md.queueing.value() << ";";
      o.require(rel(ex, md.access) <= 0.10, "E[X] within 10% at n=" + std::to_string(n));
      o.require(rel(et, md.queueing.value()) <= 0.10, "E[T] within 10% at n=" + std::to_string(n));
    }
  // Both delays are affine in n: a one-slot transmission plus a part
  // proportional to n. Doubling n doubles the second part; the plain ratio
  // ET(100)/ET(50) stays below 2 by the weight of the constant slot.
  for (double lh : {0.1, 0.2, 0.3}) {
    const double ratio = (et_sim[{100, lh}] - 1) / (et_sim[{50, lh}] - 1);
    const double analytic =
        (min_delay_geo(100, lh).queueing.value() - 1) / (min_delay_geo(50, lh).queueing.value() - 1);
    o.detail << " growth ratio(" << lh << ") sim " << ratio << " analytic " << analytic << " (plain "
             << et_sim[{100, lh}] / et_sim[{50, lh}] << ");";
    o.require(std::abs(ratio - 2) <= 0.1, "simulated (ET(100)-1)/(ET(50)-1) = 2 +- 0.1");
    o.require(std::abs(analytic - 2) <= 0.1, "analytic (ET(100)-1)/(ET(50)-1) = 2 +- 0.1");
  }
  return o;
}

// 8 ---------------------------------------------------------------------
Outcome exponential_n_insensitive() {
  Outcome o;
  const auto &a = table_cell(0, 0.2, BackoffModel::Probability, 5, 2'000'000, 50);
  const auto &b = table_cell(0, 0.2, BackoffModel::Probability, 5, 2'000'000, 100);
  const auto pol = BackoffPolicy::probability(kRobustQ, CutoffPhase::unbounded());
  const double ana50 = harness::analyze_point(Scenario::from_aggregate(50, 0.2, pol)).et.value();
  const double ana100 = harness::analyze_point(Scenario::from_aggregate(100, 0.2, pol)).et.value();
  o.detail << "ET sim n=50 " << a.mean_et() << ", n=100 " << b.mean_et() << "; analytic " << ana50 << ", "
           << ana100;
  o.require(rel(a.mean_et(), b.mean_et()) <= 0.10 && rel(b.mean_et(), a.mean_et()) <= 0.10,
            "n=50 and n=100 within 10%");
  o.require(a.mean_et() >= ana50 && b.mean_et() >= ana100, "simulation at or above analysis");
  return o;
}

// 9 ---------------------------------------------------------------------
Outcome attempt_rate_bound() {
  Outcome o;
  const int n = 50;
  sim::SimConfig cfg{.scenario = Scenario::from_aggregate(
                         n, 0.3, BackoffPolicy::window(1.0 / n, CutoffPhase::finite(1), true)),
                     .slots = 1'000'000,
                     .warmup = 1};
  cfg.monitors.attempt_rate = true;
  try {
    const auto m = sim::run(std::move(cfg));
    const auto &r = *m.attempt_rate;
    o.require(r.theorem_applies, "q <= -ln(p_S)/n precondition");
    o.require(r.max_rate <= r.bound, "max G_t <= -ln p_S");
    o.detail << "slots checked " << r.slots_checked << ", max G_t " << r.max_rate << " <= bound " << r.bound
             << ", violations 0";
  } catch (const InvariantViolation &e) {
    o.require(false, std::string("violation: ") + e.what());
  }
  return o;
}

// 10 --------------------------------------------------------------------
Outcome residual_law() {
  Outcome o;
  sim::SimConfig cfg{.scenario = Scenario::from_aggregate(50, 0.25, BackoffPolicy::window_explicit(0.5, {1, 16})),
                     .slots = 1'000'000,
                     .warmup = 10'000};
  cfg.monitors.residual = true;
  const auto m = sim::run(std::move(cfg));
  const auto &r = m.residual.at(1);
  o.require(r.total() >= 100'000, "at least 1e5 phase-slots");
  o.require(r.total_variation() < 0.02, "total variation < 0.02");
  o.detail << "W=16: " << r.total() << " phase-slots, TV " << r.total_variation();
  return o;
}

// 11 --------------------------------------------------------------------
Outcome tradeoff() {
  Outcome o;
  const auto d19 = delay_constrained_max_throughput(19, kRobustQ, 1000);
  o.require(d19.lambda_hat > 0.31 && d19.lambda_hat < 0.37, "delay-constrained rate at K=19 in (0.31, 0.37)");
  harness::SweepOptions opts;
  for (int k = 1; k <= 30; ++k) opts.ks.push_back(k);
  const auto rows = harness::run_sweep(opts);
  const auto best = harness::sweep_argmax(rows);
  const int k_best = rows[best].k;
  o.require(best > 0 && best + 1 < rows.size(), "maximum is interior to K = 1..30");
  o.require(std::abs(k_best - 19) <= 2, "maximum within 2 of K=19");
  o.detail << "K=19 bound-limited rate " << d19.lambda_hat << "; min(backlog, delay) peaks at K=" << k_best
           << " with " << rows[best].analytic.lambda_hat;
  return o;
}

// 12 --------------------------------------------------------------------
Outcome overload() {
  Outcome o;
  const std::vector<BackoffPolicy> policies{
      BackoffPolicy::probability(0.01, CutoffPhase::finite(1)),
      BackoffPolicy::probability(kRobustQ, CutoffPhase::finite(10)),
      BackoffPolicy::probability(kRobustQ, CutoffPhase::unbounded()),
      BackoffPolicy::window(kRobustQ, CutoffPhase::finite(10), true),
      BackoffPolicy::probability(kRobustQ, CutoffPhase::finite(20)),
      BackoffPolicy::window(kRobustQ, CutoffPhase::finite(20), true)};
  for (const auto &p : policies) {
    bool threw = false;
    try {
      harness::analyze_point(Scenario::from_aggregate(100, 0.4, p));
    } catch (const NoStablePoint &) {
      threw = true;
    }
    o.require(threw, "NoStablePoint for " + p.describe());
    sim::SimConfig cfg{.scenario = Scenario::from_aggregate(100, 0.4, p), .slots = 1'000'000, .warmup = 10'000};
    const auto m = sim::run(std::move(cfg));
    // With K near 20 a node that just succeeded sends its next packet at
    // once while the rest sit in deep backoff, and this capture carries the
    // load: throughput tracks 0.4 with a large but stable queue.
    o.require(m.verdict == sim::SimVerdict::Exploded, "Exploded for " + p.describe());
    o.detail << p.describe() << ": " << sim::to_string(m.verdict) << " (throughput " << m.throughput
             << ", queued " << m.queued_end << "); ";
  }
  return o;
}

} // namespace

int main(int argc, char **argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"fixed point", fixed_point},
      {"analytic self-consistency", analytic_consistency},
      {"moment oracle", moment_oracle},
      {"quasi-stability threshold", threshold},
      {"K-Exponential delay table (probability model)", table_one},
      {"K-Exponential delay table (window model)", table_two},
      {"Geometric Retransmission at optimal q", geometric_optimum},
      {"Exponential Backoff insensitive to n", exponential_n_insensitive},
      {"attempt-rate bound", attempt_rate_bound},
      {"window residual-time law", residual_law},
      {"delay/robustness tradeoff over K", tradeoff},
      {"instability above 1/e", overload}};

  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.str().c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
