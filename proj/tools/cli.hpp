#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace darkscan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitEmpty = 1;
inline constexpr int kExitFatal = 2;

/// Runs the `darkscan` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace darkscan::cli
