#pragma once

namespace teamcredit::cli {

// Full command-line entry point. Returns the process exit code: 0 success,
// 2 usage, 3 config/data error, 4 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace teamcredit::cli
