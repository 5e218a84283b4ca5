#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spitgate::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitSpam = 3;

// `args` excludes the program name. Reports go to `out`, diagnostics and
// usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spitgate::cli
