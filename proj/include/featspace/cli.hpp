#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace featspace {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,  // bad flags, unknown subcommand, invalid data
  kExitIo = 2,          // unreadable input or unwritable output
};

/// Runs one CLI invocation. `args` excludes the program name. Results go to
/// `out` unless --output names a file; diagnostics go to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace featspace
