#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sizebench::cli {

// Runs one subcommand of the command-line tool. `args` excludes the program
// name; diagnostics go to `err`, help text to `out`, data only to files
// under the subcommand's --out directory.
//
// Exit codes: 0 on success, 1 on a validation failure (bad flags, malformed
// or out-of-range config, unknown keys), 2 on a runtime failure (missing or
// unreadable files, computation errors on valid inputs).
//
// The environment variable SIZEBENCH_LOG selects diagnostic verbosity:
// "error" (default, silent success), "info", or "debug". Any other value is
// itself a validation failure.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sizebench::cli
