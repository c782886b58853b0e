#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace stataction::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kCheckFailed = 2,
  kIntegrationFailed = 3,
  kFamily = 4,
  kNoSolution = 5,
  kConfigError = 64,
  kMissingInput = 66,
};

/// Runs one invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stataction::cli
