#pragma once

#include <iosfwd>

namespace n1plus {

/// Command-line entry point. Returns the process exit code: 0 ok, 2 usage or validation
/// error, 3 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace n1plus
