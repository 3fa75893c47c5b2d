#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace chargescope::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kFormatMismatch = 3,
  kRuntimeError = 4,
};

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chargescope::cli
