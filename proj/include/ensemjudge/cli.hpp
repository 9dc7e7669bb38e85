#pragma once

#include <iosfwd>

namespace ensemjudge::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kDataError = 2,
  kAdapterError = 3,
};

// Parses argv, dispatches the subcommand and maps errors to exit codes.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ensemjudge::cli
