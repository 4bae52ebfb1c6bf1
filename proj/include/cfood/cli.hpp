#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cfood {

/// Runs the `cfood` command line. args[0] is the program name. Returns the
/// process exit code: 0 success, 2 usage, 3 I/O, 4 validation, 5 degenerate input.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace cfood
