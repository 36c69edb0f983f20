#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nrrr::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Runs the command line `args` (without the program name). Results go to
/// `out` unless an --out path is given; the resolved configuration and
/// diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nrrr::cli
