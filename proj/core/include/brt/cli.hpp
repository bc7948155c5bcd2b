#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace brt::cli {

// Entry point behind the brt binary. Subcommands: detect, train, estimate,
// analyze-far, simulate. Returns the process exit status:
//   0 success, 1 numeric/fit failure, 2 usage error,
//   3 missing/unreadable file, 4 malformed or invalid data.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace brt::cli
