#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scenefuse {

// Stable exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitContentFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs the tool with args excluding the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scenefuse
