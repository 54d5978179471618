#pragma once

namespace asbu {

/// Dispatches argv to a subcommand. Exit status: 0 success, 1 domain error,
/// 2 usage error. Diagnostics go to stderr, results to stdout or files.
int run_cli(int argc, const char* const* argv);

}  // namespace asbu
