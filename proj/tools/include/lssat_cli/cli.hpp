#pragma once

#include <string>
#include <vector>

namespace lssat::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kData = 3,
  kNumeric = 4,
};

// Runs one invocation; args excludes the program name. Diagnostics go to
// stderr, progress to stdout.
int run_cli(const std::vector<std::string>& args);

}  // namespace lssat::cli
