#pragma once

#include <ostream>

namespace cloudatelier::cli {

/// Entry point of the `cloudatelier` tool. Returns the process exit code:
/// 0 success, 1 usage, 2 data error, 3 I/O. Errors are printed to `err` as
/// a single line `ERROR <CODE>: <detail>`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cloudatelier::cli
