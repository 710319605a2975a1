// Reproduces one column of the K-Exponential Backoff delay table: n = 100,
// q = 1 - 1/e, probability model, a handful of input rates. Prints the
// analytic P-K delay next to the simulated one.
//
//   demo_table1 [K] [slots]

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "aloha/harness/runner.hpp"

int main(int argc, char **argv) {
  using namespace aloha;
  const int k = argc > 1 ? std::atoi(argv[1]) : 10;
  const long slots = argc > 2 ? std::atol(argv[2]) : 2'000'000;

  harness::ExperimentSpec spec;
  spec.lambda_hats = {0.05, 0.1, 0.15, 0.2, 0.25};
  spec.ks = {CutoffPhase::finite(k)};
  spec.slots = slots;
  spec.replications = 3;

  const auto cell = [](const harness::Cell &c) {
    std::ostringstream os;
    if (c.is_finite())
      os << std::fixed << std::setprecision(3) << c.value();
    else
      os << c.str();
    return os.str();
  };
  std::cout << "lambda_hat  ET_analytic     ET_sim     stderr  verdict\n";
  for (const auto &r : harness::run_simulate(spec)) {
    std::cout << std::setw(10) << r.lambda_hat << std::setw(13) << cell(r.et_analytic) << std::setw(11)
              << cell(r.et_sim) << std::setw(11) << cell(r.et_sim_stderr) << "  " << r.verdict << '\n';
  }
}
