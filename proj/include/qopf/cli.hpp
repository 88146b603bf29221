#pragma once

#include <iosfwd>

namespace qopf {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_convergence = 3, exit_io = 4 };

/// Entry point of the `qopf` tool. Reports go to `--out` when given,
/// otherwise to `out`; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qopf
