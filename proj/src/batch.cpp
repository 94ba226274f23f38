#include "bsim/batch.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bsim {

namespace {

BatchItem run_one(const Scenario& s) {
  BatchItem item;
  try {
    item.result = run(s);
  } catch (const std::exception& e) {
    item.error = e.what();
  }
  return item;
}

}  // namespace

std::vector<BatchItem> run_batch_serial(std::span<const Scenario> scenarios) {
  std::vector<BatchItem> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) out.push_back(run_one(s));
  return out;
}

std::vector<BatchItem> run_batch_parallel(std::span<const Scenario> scenarios, int jobs) {
  std::vector<BatchItem> out(scenarios.size());
  const auto n = static_cast<std::int64_t>(scenarios.size());
#ifdef _OPENMP
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) out[std::size_t(i)] = run_one(scenarios[std::size_t(i)]);
#else
  (void)jobs;
  for (std::int64_t i = 0; i < n; ++i) out[std::size_t(i)] = run_one(scenarios[std::size_t(i)]);
#endif
  return out;
}

std::vector<Scenario> seed_sweep(const Scenario& base, std::uint64_t first_seed, std::size_t count) {
  std::vector<Scenario> out(count, base);
  for (std::size_t i = 0; i < count; ++i) out[i].seed = first_seed + i;
  return out;
}

int max_parallel_jobs() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace bsim
