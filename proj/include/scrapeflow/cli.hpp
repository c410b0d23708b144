#pragma once

#include <iosfwd>

namespace scrapeflow {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitPermission = 3,
  kExitData = 4,
  kExitConflict = 5,
};

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scrapeflow
