#pragma once

#include <iosfwd>

namespace gridprobe::cli {

// Exit codes.
inline constexpr int kSuccess = 0;
inline constexpr int kError = 1;
inline constexpr int kNegative = 2;

/// Parses arguments and runs one subcommand. Reports go to `out` (or --out),
/// warnings and errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gridprobe::cli
