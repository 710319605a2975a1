// Command-line front end: analytic reports, simulation grids and the
// delay/robustness sweep over the cutoff phase.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aloha/closed_form.hpp"
#include "aloha/errors.hpp"
#include "aloha/fixed_point.hpp"
#include "aloha/harness/experiment.hpp"
#include "aloha/harness/result_row.hpp"
#include "aloha/harness/runner.hpp"
#include "aloha/stability.hpp"

namespace {

using namespace aloha;
using namespace aloha::harness;

enum Exit : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kNoStablePoint = 3,
  kInvariant = 4,
  kIo = 5,
  kUnstable = 6,
};

struct PointArgs {
  int n = 100;
  double lambda_hat = 0.1;
  std::string k = "inf";
  std::string model = "prob";
  std::string q = "1-1/e";
};

struct GridArgs {
  std::string spec_path;
  std::vector<int> ns;
  std::vector<double> lambda_hats;
  std::vector<std::string> ks;
  std::vector<std::string> models;
  std::string q;
  std::string q_rule;
  std::int64_t slots = 0;
  std::int64_t warmup = -1;
  std::uint64_t seed = 1;
  int replications = 0;
  int phase_cap = 0;
  std::string out;
  std::string trace;
  std::int64_t trace_interval = 1000;
};

void add_point_options(CLI::App &cmd, PointArgs &a) {
  cmd.add_option("--n", a.n, "number of nodes")->default_val(100);
  cmd.add_option("--lambda-hat", a.lambda_hat, "aggregate input rate")->required();
  cmd.add_option("--k", a.k, "cutoff phase, integer or inf")->default_val("inf");
  cmd.add_option("--model", a.model, "prob or window")->default_val("prob");
  cmd.add_option("--q,--q-rule", a.q, "q value, 1/n, 1-1/e or optimal_geo")->default_val("1-1/e");
}

void add_grid_options(CLI::App &cmd, GridArgs &a) {
  cmd.add_option("--spec", a.spec_path, "experiment file (key = value lines)");
  cmd.add_option("--n", a.ns, "node counts")->delimiter(',');
  cmd.add_option("--lambda-hat", a.lambda_hats, "aggregate input rates")->delimiter(',');
  cmd.add_option("--k", a.ks, "cutoff phases, integer or inf")->delimiter(',');
  cmd.add_option("--model", a.models, "prob and/or window")->delimiter(',');
  auto *q = cmd.add_option("--q", a.q, "fixed retransmission factor");
  cmd.add_option("--q-rule", a.q_rule, "1/n, 1-1/e or optimal_geo")->excludes(q);
  cmd.add_option("--slots", a.slots, "slots per run");
  cmd.add_option("--warmup", a.warmup, "slots excluded from metrics");
  cmd.add_option("--seed", a.seed, "first seed; replication r uses seed + r");
  cmd.add_option("--replications", a.replications, "runs per grid point");
  cmd.add_option("--phase-cap", a.phase_cap, "phase limit standing in for K = inf");
  cmd.add_option("--out", a.out, "CSV output path (default stdout)");
  cmd.add_option("--trace", a.trace, "per-slot trace output path");
  cmd.add_option("--trace-interval", a.trace_interval, "slots between trace rows")->default_val(1000);
}

ExperimentSpec build_spec(const CLI::App &cmd, const GridArgs &a) {
  ExperimentSpec spec = a.spec_path.empty() ? ExperimentSpec{} : parse_spec_file(a.spec_path);
  if (!a.ns.empty()) spec.ns = a.ns;
  if (!a.lambda_hats.empty()) spec.lambda_hats = a.lambda_hats;
  if (!a.ks.empty()) {
    spec.ks.clear();
    for (const auto &k : a.ks) spec.ks.push_back(parse_cutoff(k));
  }
  if (!a.models.empty()) {
    spec.models.clear();
    for (const auto &m : a.models) spec.models.push_back(parse_model(m));
  }
  if (!a.q.empty()) {
    spec.q_rule = QRule::parse(a.q);
    if (spec.q_rule.kind != QRuleKind::Fixed) throw ConfigError("--q takes a number; use --q-rule");
  }
  if (!a.q_rule.empty()) spec.q_rule = QRule::parse(a.q_rule);
  if (a.slots > 0) spec.slots = a.slots;
  if (a.warmup >= 0) spec.warmup = a.warmup;
  if (a.replications > 0) {
    spec.replications = a.replications;
    spec.seeds.clear();
  }
  if (cmd.count("--seed") > 0 || (a.replications > 0 && spec.seeds.empty())) {
    spec.seeds.clear();
    for (int r = 0; r < spec.replications; ++r) spec.seeds.push_back(a.seed + static_cast<std::uint64_t>(r));
  }
  if (a.phase_cap > 0) spec.phase_cap = a.phase_cap;
  if (!a.out.empty()) spec.out = a.out;
  spec.validate();
  return spec;
}

// Owns the output stream: a file when a path is given, stdout otherwise.
class Output {
public:
  explicit Output(const std::string &path) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw IoError("cannot open " + path + " for writing");
  }
  std::ostream &stream() { return file_ ? *file_ : std::cout; }
  void close() {
    if (!file_) {
      std::cout.flush();
      return;
    }
    file_->close();
    if (!*file_) throw IoError("write failed");
  }

private:
  std::unique_ptr<std::ofstream> file_;
};

RunOptions trace_options(const GridArgs &a, std::shared_ptr<std::ofstream> &trace_file) {
  RunOptions opts;
  if (a.trace.empty()) return opts;
  trace_file = std::make_shared<std::ofstream>(a.trace);
  if (!*trace_file) throw IoError("cannot open " + a.trace + " for writing");
  *trace_file << "n,lambda_hat,K,model,seed,slot,backlogged,attempt_rate,successes,window_ET\n";
  opts.trace_interval = a.trace_interval;
  opts.trace = [trace_file](const GridPoint &g, std::uint64_t seed) {
    const std::string prefix = std::to_string(g.n) + ',' + Cell::of(g.lambda_hat).str() + ',' +
                               g.k.str() + ',' + to_string(g.model) + ',' + std::to_string(seed) + ',';
    return [trace_file, prefix](const sim::TraceRow &r) {
      *trace_file << prefix << r.slot << ',' << r.backlogged << ',' << Cell::of(r.attempt_rate).str()
                  << ',' << r.successes << ',' << Cell::of(r.window_queueing_delay).str() << '\n';
    };
  };
  return opts;
}

int cmd_analyze(const PointArgs &a) {
  const auto k = parse_cutoff(a.k);
  const auto model = parse_model(a.model);
  const double q = QRule::parse(a.q).resolve(a.n, a.lambda_hat);
  const auto scenario = Scenario::from_aggregate(a.n, a.lambda_hat, analytic_policy(model, q, k));
  const auto r = analyze_point(scenario);

  std::cout << std::setprecision(10);
  std::cout << "policy      " << scenario.policy().describe() << "  n=" << a.n
            << "  lambda_hat=" << a.lambda_hat << '\n';
  std::cout << "p_L         " << r.fixed_point.p_large << '\n';
  std::cout << "p_S         " << r.fixed_point.p_small << '\n';
  std::cout << "E[X]        " << r.ex.str() << '\n';
  std::cout << "E[T]        " << r.et.str();
  if (r.et.is_inf()) std::cout << "  (" << r.infinite_because << ')';
  std::cout << '\n';
  std::cout << "verdict     " << to_string(r.verdict.cls);
  if (r.verdict.p_operating) std::cout << " at p=" << *r.verdict.p_operating;
  for (const auto &why : r.verdict.reasons) std::cout << ' ' << why;
  std::cout << '\n';
  if (r.verdict.cls == StabilityClass::Unstable) {
    std::cerr << "error: no stable queue at this operating point\n";
    return kUnstable;
  }
  return kOk;
}

int cmd_regions(int n, double lambda_hat, const std::vector<double> &qs) {
  std::cout << std::setprecision(10);
  const auto fp = solve_success_probability(lambda_hat);
  std::cout << "p_L=" << fp.p_large << "  p_S=" << fp.p_small << '\n';
  if (n >= 2) {
    std::cout << "geo stable region          " << stable_region_geo(n, lambda_hat).str() << '\n';
    std::cout << "geo delay-stable region    " << delay_stable_region_geo(n, lambda_hat).str() << '\n';
    const auto md = min_delay_geo(n, lambda_hat);
    std::cout << "geo optimal q              " << optimal_q_geo(n, lambda_hat) << "  E[X]=" << md.access
              << "  E[T]=" << (md.queueing.is_finite() ? Cell::of(md.queueing.value()) : Cell::inf()).str()
              << '\n';
  }
  std::cout << "exp stable region          " << stable_region_exp(lambda_hat).str() << '\n';
  std::cout << "exp delay-stable envelope  " << delay_stable_envelope_exp(lambda_hat).str()
            << "  (outer bound)\n";
  std::cout << "lambda_0                   " << lambda0() << '\n';
  for (double q : qs) {
    if (n < 2) break;
    const auto pa = undesired_point_pA(n, q);
    std::cout << "p_A(q=" << q << ")  exact=" << pa.exact << "  approx=" << pa.approximation
              << (pa.node_condition ? "" : "  (node condition fails)")
              << (pa.second_moment_diverges ? "  second moment diverges" : "") << '\n';
  }
  return kOk;
}

int cmd_simulate(const CLI::App &cmd, const GridArgs &a, bool compare) {
  const auto spec = build_spec(cmd, a);
  std::shared_ptr<std::ofstream> trace_file;
  const auto opts = trace_options(a, trace_file);
  Output out(spec.out);
  if (compare) {
    const auto rows = run_compare(spec, opts);
    out.stream() << kCsvHeader << kCompareHeader << '\n';
    for (const auto &r : rows) out.stream() << to_csv(r) << '\n';
  } else {
    write_csv(out.stream(), run_simulate(spec, opts));
  }
  out.close();
  if (trace_file) {
    trace_file->close();
    if (!*trace_file) throw IoError("trace write failed");
  }
  return kOk;
}

struct SweepArgs {
  int n = 100;
  std::string q = "1-1/e";
  double bound = 1000.0;
  std::vector<int> ks;
  std::int64_t sim_slots = 0;
  std::uint64_t seed = 1;
  int steps = 7;
  std::string out;
};

int cmd_sweep(const SweepArgs &a) {
  SweepOptions o;
  o.n = a.n;
  o.q = QRule::parse(a.q).resolve(a.n, 0.1);
  o.bound = a.bound;
  o.ks = a.ks;
  if (o.ks.empty())
    for (int k = 1; k <= 30; ++k) o.ks.push_back(k);
  o.sim_slots = a.sim_slots;
  o.seed = a.seed;
  o.bisection_steps = a.steps;
  const auto rows = run_sweep(o);
  const auto best = sweep_argmax(rows);
  Output out(a.out);
  out.stream() << "K,lambda_S_backlog,lambda_D_bound,lambda_max_D,lambda_S_sim,argmax\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto &r = rows[i];
    out.stream() << r.k << ',' << Cell::of(r.analytic.backlog_throughput).str() << ','
                 << Cell::of(r.analytic.delay.lambda_hat).str() << ',' << Cell::of(r.analytic.lambda_hat).str()
                 << ',' << Cell::of(r.simulated_stable).str() << ',' << (i == best ? "1" : "0") << '\n';
  }
  out.close();
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Buffered slotted Aloha with K-Exponential Backoff: analysis and simulation"};
  app.require_subcommand(1);

  PointArgs analyze_args;
  auto *analyze = app.add_subcommand("analyze", "p_L, p_S, E[X], E[T] and stability verdict");
  add_point_options(*analyze, analyze_args);

  int regions_n = 100;
  double regions_lambda = 0.1;
  std::vector<double> regions_q;
  auto *regions = app.add_subcommand("regions", "stable and delay-stable regions of q, lambda_0, p_A");
  regions->add_option("--n", regions_n, "number of nodes")->default_val(100);
  regions->add_option("--lambda-hat", regions_lambda, "aggregate input rate")->required();
  regions->add_option("--q", regions_q, "q values at which to report p_A")->delimiter(',');

  GridArgs sim_args;
  auto *simulate = app.add_subcommand("simulate", "simulate a grid and write CSV rows");
  add_grid_options(*simulate, sim_args);

  GridArgs cmp_args;
  auto *compare = app.add_subcommand("compare", "simulated vs analytic values with relative gaps");
  add_grid_options(*compare, cmp_args);

  SweepArgs sweep_args;
  auto *sweep = app.add_subcommand("sweep", "throughput limits over the cutoff phase K");
  sweep->add_option("--n", sweep_args.n, "number of nodes")->default_val(100);
  sweep->add_option("--q,--q-rule", sweep_args.q, "q value or 1-1/e")->default_val("1-1/e");
  sweep->add_option("--bound", sweep_args.bound, "bound on the service-time second moment")->default_val(1000);
  sweep->add_option("--k", sweep_args.ks, "cutoff phases (default 1..30)")->delimiter(',');
  sweep->add_option("--sim-slots", sweep_args.sim_slots, "also bisect the simulated stable rate")->default_val(0);
  sweep->add_option("--seed", sweep_args.seed, "seed for the simulated bisection")->default_val(1);
  sweep->add_option("--steps", sweep_args.steps, "bisection steps")->default_val(7);
  sweep->add_option("--out", sweep_args.out, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*analyze) return cmd_analyze(analyze_args);
    if (*regions) return cmd_regions(regions_n, regions_lambda, regions_q);
    if (*simulate) return cmd_simulate(*simulate, sim_args, false);
    if (*compare) return cmd_simulate(*compare, cmp_args, true);
    if (*sweep) return cmd_sweep(sweep_args);
  } catch (const NoStablePoint &e) {
    std::cerr << "error: no stable point: " << e.what() << '\n';
    return kNoStablePoint;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DomainError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InvariantViolation &e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kInvariant;
  } catch (const IoError &e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
