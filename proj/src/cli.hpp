#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vjspoof::cli {

/// Exit codes: 0 success, 1 negative domain result, 2 error.
inline constexpr int exit_ok = 0;
inline constexpr int exit_negative = 1;
inline constexpr int exit_error = 2;

/// Parses args (without the program name) and runs one subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vjspoof::cli
