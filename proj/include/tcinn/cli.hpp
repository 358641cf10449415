#pragma once

namespace tcinn {

// Entry point for the command-line tool. Parses one of the subcommands
// (phantom | train | infer | eval), runs it, and returns the process exit
// code: 0 success, 1 I/O failure, 2 argument/validation failure, 3 numerical
// failure.
int run_cli(int argc, const char* const* argv);

}  // namespace tcinn
