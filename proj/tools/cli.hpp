#pragma once

#include <iosfwd>

namespace roughvol::cli {

/// Runs one command line. Exit codes: 0 success, 1 domain or validation error, 2 usage error
/// or malformed config. Numeric output goes to --out (default: out); logs and diagnostics to err.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace roughvol::cli
