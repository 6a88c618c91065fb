#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace caliblab {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitCapacity = 3, kExitInternal = 4 };

// Entry point of the command-line tool. args excludes the program name.
// Reports go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace caliblab
