#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace framefit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

std::string version();

// Runs one command line (without the program name). Results go to files in
// --out-dir; `out` gets help text and a short summary, `err` gets warnings
// and the single-line error report.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace framefit::cli
