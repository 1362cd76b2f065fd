#pragma once

#include <iosfwd>

namespace rgbsde {

/// Exit codes of the command-line front-end.
enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_solver = 3, exit_audit_failed = 4 };

/// Runs one subcommand (catalog, simulate, solve, audit, converge,
/// pde-compare). Human-readable output goes to out, diagnostics to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rgbsde
