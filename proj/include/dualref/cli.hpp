#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dualref::cli {

inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDiverged = 4;

inline constexpr const char* kVersion = "0.1.0";

/// Runs one subcommand. `args` excludes the program name. Machine-readable
/// JSON goes to `out`, tables and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace dualref::cli
