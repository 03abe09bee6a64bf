#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace d3g::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // IO and anything unexpected
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

/// Runs the d3g tool. args[0] is the program name. Human-readable output
/// goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace d3g::cli
