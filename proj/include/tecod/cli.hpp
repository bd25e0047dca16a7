#pragma once

#include <iosfwd>

namespace tecod::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kDecodeFailure = 3 };

// Entry point of the `tecod` tool; writes results to `out`, diagnostics to
// `err`, and returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tecod::cli
