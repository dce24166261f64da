#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mindiff {

/// Exit codes of the command line tool.
enum ExitCode : int { kExitPass = 0, kExitUsage = 1, kExitNumerical = 2, kExitVerification = 3 };

/// Runs `mindiff <args...>` (args exclude the program name). Artifacts go to
/// --out, or to out when --out is absent or "-"; diagnostics go to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mindiff
