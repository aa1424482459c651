#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cuenet::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kConfigError = 3,
  kAssertionFailed = 4,
};

/// Parses `args` (without the program name) and runs the selected subcommand.
/// Human-readable results go to `out`, diagnostics to `err`; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cuenet::cli
