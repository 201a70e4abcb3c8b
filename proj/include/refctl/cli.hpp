#pragma once

#include <iosfwd>

namespace refctl::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kConfig = 2, kViolation = 3 };

/// Parses and runs one subcommand. Log verbosity follows REFCTL_LOG
/// (quiet, info or debug; info when unset).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace refctl::cli
