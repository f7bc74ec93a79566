#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cogmac::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs the `cogmac` command line. `args` excludes the program name.
/// Returns 0 on success, 2 on usage or configuration errors, 1 otherwise.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cogmac::cli
