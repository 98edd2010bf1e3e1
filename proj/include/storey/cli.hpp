#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace storey::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitSchema = 2;
inline constexpr int kExitRuntime = 3;

// Runs one command line (without the program name). Results go to `out`,
// failures to `err` as a single `error kind=<kind> message="..."` line.
// Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace storey::cli
