#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hflow {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNotConverged = 2, kExitVerifyFailed = 3 };

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hflow
