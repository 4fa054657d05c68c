#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace entichart::cli {

/// Runs one command line (argv[0] is the program name). Normal output goes to
/// `out`, diagnostics to `err`. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace entichart::cli
