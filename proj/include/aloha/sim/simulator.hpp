#pragma once

// Slot-level simulation of n buffered nodes sharing a collision channel under
// probability- or window-based K-Exponential Backoff.
//
// Per slot, in order:
//   1. Bernoulli(lambda) arrivals. A packet reaching an empty buffer becomes
//      a fresh phase-0 HOL packet and may transmit in the same slot.
//   2. Every HOL packet whose countdown reached zero transmits.
//   3. One transmission succeeds; two or more collide. A colliding packet
//      moves to phase min(i+1, K) and draws a new countdown.
//   4. All other countdowns advance by one slot.
//
// Countdowns are stored as the absolute slot of the next transmission. In
// the window model the countdown is Uniform{0..W_i-1}; in the probability
// model it is the Geometric(q^i) number of silent slots, which gives the
// same per-slot law as an independent coin of bias q^i. Between events the
// state is frozen, so idle stretches are skipped in one step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "aloha/errors.hpp"
#include "aloha/fixed_point.hpp"
#include "aloha/policy.hpp"
#include "aloha/sim/detectors.hpp"
#include "aloha/sim/random.hpp"

namespace aloha::sim {

inline constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

struct Monitors {
  bool attempt_rate = false;            // G_t per state, Theorem-2 style bound check
  bool record_attempt_rate_series = false; // keep G_t for every measured slot
  bool residual = false;                // countdown histogram per window phase
  std::int64_t residual_max_window = 4096; // phases with larger W_i are not tracked
  bool conservation = false;            // arrivals = departures + queued, every event
};

// State of the network at the start of a slot, before its arrivals.
struct Checkpoint {
  std::int64_t slot = 0;
  std::int64_t queued = 0;     // packets in all buffers
  int backlogged = 0;          // HOL packets in phase >= 1
  std::optional<double> running_queueing_delay; // mean T since warmup
  std::optional<double> window_queueing_delay;  // mean T since the previous checkpoint
};

struct TraceRow {
  std::int64_t slot = 0;
  int backlogged = 0;
  double attempt_rate = 0.0;
  std::int64_t successes = 0; // since the previous row
  std::optional<double> window_queueing_delay;
};

struct SlotRecord {
  std::int64_t slot = 0;
  std::span<const int> transmitters;
  bool success = false;
  std::int64_t arrivals_total = 0;
  std::int64_t departures_total = 0;
  std::int64_t queued_total = 0;
};

struct SimConfig {
  Scenario scenario;
  std::int64_t slots = 2'000'000;
  std::int64_t warmup = 100'000;
  std::uint64_t seed = 1;
  int phase_cap = 64;             // stands in for K when K is unbounded
  Monitors monitors{};
  int checkpoints = 200;          // evenly spaced after warmup
  bool saturated = false;         // every node always has a packet
  double quasi_factor = 3.0;      // see detect_quasi_stability
  std::int64_t trace_interval = 0; // 0 disables trace rows
  std::function<void(const TraceRow &)> trace_sink{};
  std::function<void(const SlotRecord &)> slot_observer{};

  void validate() const {
    if (slots <= 0) throw ConfigError("slots must be positive");
    if (warmup < 0 || warmup >= slots) throw ConfigError("warmup must satisfy 0 <= warmup < slots");
    if (phase_cap < 1) throw ConfigError("phase_cap must be >= 1");
    if (checkpoints < 2) throw ConfigError("need at least two checkpoints");
    if (trace_interval < 0) throw ConfigError("trace_interval must be >= 0");
  }
};

struct AttemptRateStats {
  bool theorem_applies = false; // q <= -ln(p_S)/n with finite K
  double bound = 0.0;           // -ln p_S
  double saturation_level = 0.0; // q/(1-q)
  double max_rate = 0.0;
  std::int64_t slots_checked = 0;
  std::int64_t slots_at_saturation_level = 0;
  std::vector<double> series;   // per measured slot, if requested
};

struct PhaseResidual {
  std::int64_t window = 1;
  std::vector<std::int64_t> counts; // counts[k]: slots a HOL in this phase showed countdown k

  std::int64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

  // Total-variation distance to pi_k = 2 (W - k) / (W (W + 1)).
  double total_variation() const {
    const double n = static_cast<double>(total());
    if (n == 0) return 1.0;
    const double w = static_cast<double>(window);
    double tv = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const double pi = 2.0 * (w - static_cast<double>(k)) / (w * (w + 1.0));
      tv += std::abs(static_cast<double>(counts[k]) / n - pi);
    }
    return 0.5 * tv;
  }
};

struct SimMetrics {
  std::int64_t measured_slots = 0;
  std::int64_t arrivals = 0;   // after warmup
  std::int64_t departures = 0; // after warmup
  std::int64_t attempts = 0;   // transmissions after warmup
  std::int64_t queued_end = 0;

  double throughput = 0.0;
  std::optional<double> mean_access_delay;
  std::optional<double> mean_queueing_delay;
  std::optional<double> p_empirical;

  std::vector<Checkpoint> checkpoints;
  std::vector<double> phase_occupancy; // time share of HOL packets per phase
  double backlog_drift = 0.0;          // packets per slot, least squares over checkpoints
  SimVerdict verdict = SimVerdict::Converged;

  std::optional<AttemptRateStats> attempt_rate;
  std::map<int, PhaseResidual> residual;

  // Cumulative mean queueing delay at each checkpoint that has one.
  std::vector<double> running_queueing_delay() const {
    std::vector<double> out;
    for (const auto &c : checkpoints)
      if (c.running_queueing_delay) out.push_back(*c.running_queueing_delay);
    return out;
  }
};

class Simulator {
public:
  explicit Simulator(SimConfig config) : cfg_(std::move(config)) {
    cfg_.validate();
    const auto &policy = cfg_.scenario.policy();
    n_ = cfg_.scenario.n();
    lambda_ = cfg_.scenario.lambda();
    k_ = policy.cutoff().effective(cfg_.phase_cap);
    window_model_ = policy.is_window();
    attempt_.resize(static_cast<std::size_t>(k_) + 1);
    window_.resize(static_cast<std::size_t>(k_) + 1, 1);
    request_.resize(static_cast<std::size_t>(k_) + 1);
    for (int i = 0; i <= k_; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      attempt_[idx] = std::pow(policy.q(), i);
      if (window_model_) {
        const double w = policy.window_size(i);
        if (w != std::floor(w)) throw ConfigError("simulated windows must be integers");
        if (w > 4.0e18) throw ConfigError("window too large to simulate; lower phase_cap");
        window_[idx] = static_cast<std::int64_t>(w);
        request_[idx] = 2.0 / (w + 1.0);
      } else {
        request_[idx] = attempt_[idx];
      }
    }
    phase_count_.assign(static_cast<std::size_t>(k_) + 1, 0);
    occupancy_.assign(static_cast<std::size_t>(k_) + 1, 0.0);

    nodes_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      auto &nd = nodes_[static_cast<std::size_t>(i)];
      nd.rng = node_stream(cfg_.seed, static_cast<std::uint64_t>(i));
      if (cfg_.saturated) {
        nd.next_arrival = kNever;
        nd.queue.push_back(0);
        start_hol(nd, 0);
        ++queued_;
        ++arrivals_total_;
      } else {
        nd.next_arrival = geometric_failures(nd.rng, lambda_);
      }
    }

    if (cfg_.monitors.attempt_rate) {
      AttemptRateStats s;
      const double lambda_hat = cfg_.scenario.lambda_hat();
      if (lambda_hat <= kInvE && policy.cutoff().is_finite() && n_ >= 2) {
        const auto fp = solve_success_probability(lambda_hat);
        s.bound = -fp.log_p_small;
        s.theorem_applies = policy.q() <= s.bound / n_;
      }
      const double q = policy.q();
      s.saturation_level = q < 1.0 ? q / (1.0 - q) : std::numeric_limits<double>::max();
      rate_ = s;
    }
    if (cfg_.monitors.residual && window_model_) {
      for (int i = 0; i <= k_; ++i) {
        const auto w = window_[static_cast<std::size_t>(i)];
        if (w <= cfg_.monitors.residual_max_window)
          residual_[i] = PhaseResidual{w, std::vector<std::int64_t>(static_cast<std::size_t>(w), 0)};
      }
    }
  }

  SimMetrics run() {
    const std::int64_t span = cfg_.slots - cfg_.warmup;
    std::vector<std::int64_t> checkpoint_slots;
    for (int c = 0; c < cfg_.checkpoints; ++c)
      checkpoint_slots.push_back(cfg_.warmup + span * c / (cfg_.checkpoints - 1));
    checkpoint_slots.back() = cfg_.slots; // recorded after the last slot
    std::size_t next_cp = 0;
    std::int64_t next_trace = cfg_.trace_interval > 0 ? 0 : kNever;

    std::int64_t next_event = scan_next_event();
    std::int64_t t = 0;
    while (t < cfg_.slots) {
      while (next_cp < checkpoint_slots.size() && checkpoint_slots[next_cp] == t) {
        record_checkpoint(t);
        ++next_cp;
      }
      if (t == next_trace) {
        emit_trace(t);
        next_trace += cfg_.trace_interval;
      }
      if (t == next_event) {
        process_event(t);
        next_event = scan_next_event();
        ++t;
      } else {
        std::int64_t stop = std::min({next_event, next_trace, cfg_.slots});
        if (next_cp < checkpoint_slots.size()) stop = std::min(stop, checkpoint_slots[next_cp]);
        t = std::max(stop, t + 1);
      }
    }
    account_idle(last_end_, cfg_.slots);
    check_rate(last_end_, cfg_.slots - 1);
    while (next_cp < checkpoint_slots.size()) {
      record_checkpoint(cfg_.slots);
      ++next_cp;
    }
    return finish();
  }

private:
  struct Node {
    std::deque<std::int64_t> queue; // arrival slots, front is HOL
    int phase = 0;
    std::int64_t hol_since = 0;
    std::int64_t next_tx = kNever;
    std::int64_t next_arrival = kNever;
    Engine rng;
  };

  std::int64_t draw_wait(Node &nd, int phase) {
    const auto idx = static_cast<std::size_t>(phase);
    return window_model_ ? uniform_below(nd.rng, window_[idx]) : geometric_failures(nd.rng, attempt_[idx]);
  }

  void start_hol(Node &nd, std::int64_t slot) {
    nd.phase = 0;
    nd.hol_since = slot;
    nd.next_tx = slot + draw_wait(nd, 0);
    ++phase_count_[0];
  }

  std::int64_t scan_next_event() const {
    std::int64_t e = kNever;
    for (const auto &nd : nodes_) {
      e = std::min(e, nd.next_arrival);
      if (!nd.queue.empty()) e = std::min(e, nd.next_tx);
    }
    return e;
  }

  int backlogged() const {
    return std::accumulate(phase_count_.begin() + 1, phase_count_.end(), 0);
  }

  int hol_count() const { return std::accumulate(phase_count_.begin(), phase_count_.end(), 0); }

  // Expected transmissions in a slot given the state before its arrivals:
  // (n - n_b) lambda + sum_{i >= 1} n_i r_i.
  double attempt_rate_now() const {
    double g = (n_ - backlogged()) * (cfg_.saturated ? 0.0 : lambda_);
    for (int i = 1; i <= k_; ++i) g += phase_count_[static_cast<std::size_t>(i)] * request_[static_cast<std::size_t>(i)];
    return g;
  }

  // The pre-arrival state has been constant on slots [from, to].
  void check_rate(std::int64_t from, std::int64_t to) {
    if (!rate_ || to < from) return;
    const std::int64_t lo = std::max(from, cfg_.warmup);
    const double g = attempt_rate_now();
    if (rate_->theorem_applies && g > rate_->bound * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "attempt rate " << g << " exceeds -ln p_S = " << rate_->bound << " at slot " << from
         << "; backlogged=" << backlogged() << " phase counts:";
      for (auto c : phase_count_) os << ' ' << c;
      throw InvariantViolation(os.str());
    }
    if (to < lo) return;
    const std::int64_t w = to - lo + 1;
    rate_->max_rate = std::max(rate_->max_rate, g);
    rate_->slots_checked += w;
    if (g >= rate_->saturation_level) rate_->slots_at_saturation_level += w;
    if (cfg_.monitors.record_attempt_rate_series) rate_->series.insert(rate_->series.end(), static_cast<std::size_t>(w), g);
  }

  // Decision-time state has been constant on slots [from, to).
  void account_idle(std::int64_t from, std::int64_t to) {
    const std::int64_t lo = std::max(from, cfg_.warmup);
    if (to <= lo) return;
    const double w = static_cast<double>(to - lo);
    for (std::size_t i = 0; i < phase_count_.size(); ++i) occupancy_[i] += w * phase_count_[i];
    if (residual_.empty()) return;
    for (const auto &nd : nodes_) {
      if (nd.queue.empty()) continue;
      auto it = residual_.find(nd.phase);
      if (it == residual_.end()) continue;
      for (std::int64_t s = lo; s < to; ++s) {
        const std::int64_t c = nd.next_tx - s;
        if (c >= 0 && c < it->second.window) ++it->second.counts[static_cast<std::size_t>(c)];
      }
    }
  }

  void record_departure(std::int64_t t, const Node &nd) {
    if (t < cfg_.warmup) return;
    const double x = static_cast<double>(t - nd.hol_since + 1);
    const double tq = static_cast<double>(t - nd.queue.front() + 1);
    sum_access_ += x;
    sum_queueing_ += tq;
    ++departures_;
    ++window_departures_;
    window_queueing_ += tq;
    ++trace_successes_;
    trace_queueing_ += tq;
  }

  void process_event(std::int64_t t) {
    account_idle(last_end_, t);
    check_rate(last_end_, t);

    for (auto &nd : nodes_) {
      if (nd.next_arrival != t) continue;
      nd.queue.push_back(t);
      ++queued_;
      ++arrivals_total_;
      if (t >= cfg_.warmup) ++arrivals_;
      if (nd.queue.size() == 1) start_hol(nd, t);
      nd.next_arrival = t + 1 + geometric_failures(nd.rng, lambda_);
    }
    account_idle(t, t + 1);

    transmitters_.clear();
    for (int i = 0; i < n_; ++i) {
      const auto &nd = nodes_[static_cast<std::size_t>(i)];
      if (!nd.queue.empty() && nd.next_tx == t) transmitters_.push_back(i);
    }
    if (t >= cfg_.warmup) attempts_ += static_cast<std::int64_t>(transmitters_.size());

    const bool success = transmitters_.size() == 1;
    if (success) {
      auto &nd = nodes_[static_cast<std::size_t>(transmitters_.front())];
      record_departure(t, nd);
      --phase_count_[static_cast<std::size_t>(nd.phase)];
      nd.queue.pop_front();
      --queued_;
      ++departures_total_;
      if (cfg_.saturated && nd.queue.empty()) {
        nd.queue.push_back(t + 1);
        ++queued_;
        ++arrivals_total_;
      }
      if (!nd.queue.empty())
        start_hol(nd, t + 1);
      else
        nd.next_tx = kNever;
    } else {
      for (int i : transmitters_) {
        auto &nd = nodes_[static_cast<std::size_t>(i)];
        --phase_count_[static_cast<std::size_t>(nd.phase)];
        nd.phase = std::min(nd.phase + 1, k_);
        ++phase_count_[static_cast<std::size_t>(nd.phase)];
        nd.next_tx = t + 1 + draw_wait(nd, nd.phase);
      }
    }
    last_end_ = t + 1;

    if (cfg_.monitors.conservation) check_conservation(t);
    if (cfg_.slot_observer)
      cfg_.slot_observer(SlotRecord{t, std::span<const int>(transmitters_), success, arrivals_total_,
                                    departures_total_, queued_});
  }

  void check_conservation(std::int64_t t) const {
    std::int64_t in_buffers = 0;
    int hol = 0;
    for (const auto &nd : nodes_) {
      in_buffers += static_cast<std::int64_t>(nd.queue.size());
      if (!nd.queue.empty()) {
        ++hol;
        if (nd.phase < 0 || nd.phase > k_) throw InvariantViolation("HOL phase out of range");
      }
    }
    if (in_buffers != queued_ || arrivals_total_ != departures_total_ + queued_ || hol != hol_count())
      throw InvariantViolation("packet conservation violated at slot " + std::to_string(t));
  }

  void record_checkpoint(std::int64_t t) {
    Checkpoint c;
    c.slot = t;
    c.queued = queued_;
    c.backlogged = backlogged();
    if (departures_ > 0) c.running_queueing_delay = sum_queueing_ / static_cast<double>(departures_);
    if (window_departures_ > 0) c.window_queueing_delay = window_queueing_ / static_cast<double>(window_departures_);
    window_departures_ = 0;
    window_queueing_ = 0.0;
    checkpoints_.push_back(c);
  }

  void emit_trace(std::int64_t t) {
    if (!cfg_.trace_sink) return;
    TraceRow row;
    row.slot = t;
    row.backlogged = backlogged();
    row.attempt_rate = attempt_rate_now();
    row.successes = trace_successes_;
    if (trace_successes_ > 0) row.window_queueing_delay = trace_queueing_ / static_cast<double>(trace_successes_);
    trace_successes_ = 0;
    trace_queueing_ = 0.0;
    cfg_.trace_sink(row);
  }

  SimMetrics finish() {
    SimMetrics m;
    m.measured_slots = cfg_.slots - cfg_.warmup;
    m.arrivals = arrivals_;
    m.departures = departures_;
    m.attempts = attempts_;
    m.queued_end = queued_;
    m.throughput = static_cast<double>(departures_) / static_cast<double>(m.measured_slots);
    if (departures_ > 0) {
      m.mean_access_delay = sum_access_ / static_cast<double>(departures_);
      m.mean_queueing_delay = sum_queueing_ / static_cast<double>(departures_);
    }
    if (attempts_ > 0) m.p_empirical = static_cast<double>(departures_) / static_cast<double>(attempts_);
    m.checkpoints = std::move(checkpoints_);
    const double occ = std::accumulate(occupancy_.begin(), occupancy_.end(), 0.0);
    m.phase_occupancy = occupancy_;
    if (occ > 0)
      for (auto &v : m.phase_occupancy) v /= occ;
    m.backlog_drift = backlog_slope(m.checkpoints);
    m.verdict = cfg_.saturated ? SimVerdict::Converged
                               : classify_run(m.checkpoints, m.running_queueing_delay(),
                                              cfg_.scenario.lambda_hat(), cfg_.quasi_factor);
    m.attempt_rate = std::move(rate_);
    m.residual = std::move(residual_);
    return m;
  }

  SimConfig cfg_;
  int n_ = 0;
  double lambda_ = 0.0;
  int k_ = 1;
  bool window_model_ = false;
  std::vector<double> attempt_;       // q^i
  std::vector<std::int64_t> window_;  // W_i (window model)
  std::vector<double> request_;       // r_i
  std::vector<Node> nodes_;
  std::vector<int> phase_count_;      // HOL packets per phase
  std::vector<double> occupancy_;
  std::vector<int> transmitters_;
  std::vector<Checkpoint> checkpoints_;
  std::optional<AttemptRateStats> rate_;
  std::map<int, PhaseResidual> residual_;

  std::int64_t last_end_ = 0;
  std::int64_t queued_ = 0;
  std::int64_t arrivals_total_ = 0;
  std::int64_t departures_total_ = 0;
  std::int64_t arrivals_ = 0;
  std::int64_t departures_ = 0;
  std::int64_t attempts_ = 0;
  double sum_access_ = 0.0;
  double sum_queueing_ = 0.0;
  std::int64_t window_departures_ = 0;
  double window_queueing_ = 0.0;
  std::int64_t trace_successes_ = 0;
  double trace_queueing_ = 0.0;
};

inline SimMetrics run(SimConfig config) { return Simulator(std::move(config)).run(); }

} // namespace aloha::sim
