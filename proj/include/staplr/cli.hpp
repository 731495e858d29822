#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace staplr {

/// Entry point of the `staplr` command-line tool.  Returns the process exit
/// status: 0 on success, 1 on a failed run or check, 2 on a usage error.
/// Failures are reported on `err` as a single-line JSON object.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace staplr
