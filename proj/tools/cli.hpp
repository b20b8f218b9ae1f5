#pragma once

#include <iosfwd>

namespace eovseg {

// Exit codes: 0 success, 1 verification failure, 2 usage error,
// 3 I/O or format error.
enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitUsage = 2, kExitIo = 3 };

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eovseg
