#pragma once

#include <iosfwd>

namespace mbv {

enum ExitCode { exit_safe = 0, exit_violation = 1, exit_inconclusive = 2, exit_error = 3 };

// The mbv command line. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mbv
