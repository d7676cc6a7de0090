#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace celt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;

/// Runs one command line (args[0] is the program name) and returns the
/// process exit status. Results go to `out`, diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace celt::cli
