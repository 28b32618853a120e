#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rcw {

/// Exit codes of the `rcw` tool.
enum ExitCode : int {
    exit_success = 0,
    exit_negative = 1,  // verification negative
    exit_error = 2,     // usage or data error
    exit_trivial = 3,   // generation fell back to the whole graph
};

/// Runs one `rcw` command. args[0] is the program name. JSON results go to
/// `out` unless --output names a file; diagnostics and logs go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rcw
