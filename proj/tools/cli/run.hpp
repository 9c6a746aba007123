#pragma once

namespace imia::cli {

enum ExitCode : int { kExitOk = 0, kExitUserError = 1, kExitInternalError = 2 };

/// Parses argv, dispatches to a subcommand and maps failures to exit codes.
/// Failures print one JSON error record on stderr.
int run_cli(int argc, char** argv);

}  // namespace imia::cli
