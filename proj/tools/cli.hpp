#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fenplan::cli {

// Runs one command line (args excludes the program name) and returns the
// process exit code: 0 success, 1 input/IO error, 2 infeasible plan,
// 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fenplan::cli
