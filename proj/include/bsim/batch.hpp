// Runs many independent scenarios. The serial runner is the reference; the
// OpenMP runner must produce identical results in the same order.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsim/sim.hpp"

namespace bsim {

struct BatchItem {
  std::optional<RunResult> result;
  /// Set instead of `result` when the run threw.
  std::string error;

  bool ok() const { return result.has_value(); }
};

std::vector<BatchItem> run_batch_serial(std::span<const Scenario> scenarios);

/// jobs <= 0 uses the OpenMP default thread count. Output order follows the
/// input order regardless of completion order.
std::vector<BatchItem> run_batch_parallel(std::span<const Scenario> scenarios, int jobs = 0);

/// Copies of `base` with seeds first_seed, first_seed + 1, ...
std::vector<Scenario> seed_sweep(const Scenario& base, std::uint64_t first_seed, std::size_t count);

/// Threads the parallel runner can use; 1 when built without OpenMP.
int max_parallel_jobs();

}  // namespace bsim
