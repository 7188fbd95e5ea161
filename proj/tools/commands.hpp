#pragma once

// Subcommands of gopo_cli. run_cli is the whole program minus main(), so the
// tests drive it in-process with string streams.

#include <iosfwd>
#include <string>
#include <vector>

namespace gopo::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,    // I/O and other runtime errors
  kUsage = 2,      // bad flags, bad config, malformed input
  kNumerical = 3,  // training halted on non-finite logits
  kInvariant = 4,  // a check failed
};

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gopo::cli
