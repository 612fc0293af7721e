#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tutorstack::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kFailure = 2 };

/// Runs one subcommand; `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Asks a running `serve` to shut down, as SIGINT/SIGTERM do.
void request_shutdown();

}  // namespace tutorstack::cli
