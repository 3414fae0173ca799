#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace preddiff::cli {

/// Runs the command line `args` (without the program name). Reports go to
/// `out` unless --out names a file; diagnostics go to `err`.
/// Returns 0 on success, 2 for configuration errors, 1 for engine failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace preddiff::cli
