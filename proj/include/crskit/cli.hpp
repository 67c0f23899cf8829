#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crskit {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitUsage = 2 };

/// Runs one CLI invocation. `args[0]` is the program name. Data goes to the
/// files named by --out (or `out` when omitted); diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crskit
