// Serial vs OpenMP batch runner over a seed sweep of one preset.
//
//   bench_batch [preset] [runs] [jobs]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "bsim/batch.hpp"
#include "bsim/scenario_io.hpp"

using Clock = std::chrono::steady_clock;

int main(int argc, char** argv) {
  const std::string preset = argc > 1 ? argv[1] : "ble-700lx";
  const std::size_t runs = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 16;
  const int jobs = argc > 3 ? std::atoi(argv[3]) : 0;

  const auto scenarios = bsim::seed_sweep(bsim::load_scenario(preset), 1, runs);

  const auto t0 = Clock::now();
  const auto serial = bsim::run_batch_serial(scenarios);
  const auto t1 = Clock::now();
  const auto parallel = bsim::run_batch_parallel(scenarios, jobs);
  const auto t2 = Clock::now();

  bool same = serial.size() == parallel.size();
  for (std::size_t i = 0; same && i < serial.size(); ++i) {
    same = serial[i].ok() && parallel[i].ok() && serial[i].result->summary == parallel[i].result->summary &&
           serial[i].result->cycles == parallel[i].result->cycles;
  }

  const double ts = std::chrono::duration<double>(t1 - t0).count();
  const double tp = std::chrono::duration<double>(t2 - t1).count();
  std::printf("preset=%s runs=%zu threads=%d\n", preset.c_str(), runs,
              jobs > 0 ? jobs : bsim::max_parallel_jobs());
  std::printf("serial   %8.3f s  (%.3f s/run)\n", ts, ts / double(runs));
  std::printf("parallel %8.3f s  (%.3f s/run)\n", tp, tp / double(runs));
  std::printf("speedup  %8.2fx\n", tp > 0 ? ts / tp : 0.0);
  std::printf("results  %s\n", same ? "identical" : "DIFFERENT");
  return same ? 0 : 1;
}
