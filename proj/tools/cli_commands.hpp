#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace iccnls::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsage = 2,
    kMaxIter = 3,
    kInfeasible = 4,
};

/// Runs one command line (argv[0] excluded) and returns the process exit code.
/// Commands: synth, fit, predict, sweep, inspect.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Formats with 6 significant digits, the table convention.
std::string format_short(double value);
/// Shortest decimal form that reads back to the same double.
std::string format_full(double value);

}  // namespace iccnls::cli
