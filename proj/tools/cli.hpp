#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace convdysat::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInputError = 2,
  kDivergence = 3,
  kShapeMismatch = 4,
  kGradcheckFailed = 5,
};

// Runs one command line (without the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace convdysat::cli
