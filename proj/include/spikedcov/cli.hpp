#pragma once

#include <iosfwd>

namespace spikedcov::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Parses argv (argv[0] is the program name) and runs a subcommand. Results go
/// to --out or to `out`; diagnostics go to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spikedcov::cli
