// Command-line front end: solve, simulate, sweep, report, show-preset.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bsim {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitValidation = 2,
  kExitInfeasible = 3,
  kExitIo = 4,
};

/// Overrides the output directory of simulate and sweep when set.
inline constexpr const char* kOutDirEnv = "BSIM_OUT_DIR";

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bsim
