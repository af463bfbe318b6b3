#pragma once

// The `rmsd` operator command line, as a library so tests can drive it.

#include <iosfwd>
#include <string>
#include <vector>

namespace rmsd::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  // I/O and unexpected errors
  kValidation = 2,
  kUnauthorized = 3,
  kUnavailable = 4,
};

/// `args` excludes the program name. The default endpoint comes from
/// RMSD_NODE when --node is not given.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rmsd::cli
