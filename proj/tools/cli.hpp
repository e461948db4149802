#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctxeng::cli {

enum ExitCode : int {
    kSuccess = 0,
    kError = 1,
    kRunFailed = 2,
    kPaused = 3,
    kUsage = 64,
};

/// Entry point shared by main() and the tests. `args` excludes the program
/// name. Confirmation prompts read one line from `in`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace ctxeng::cli
