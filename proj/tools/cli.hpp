#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDiverged = 4;

// Thread count for `eval`, read from this variable; defaults to 1.
inline constexpr const char* kThreadsEnv = "LNN_THREADS";

// Runs one command line (without the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lnn::cli
