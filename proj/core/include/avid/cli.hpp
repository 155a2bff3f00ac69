#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avid {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `avid` tool. `args` excludes the program name.
/// Subcommands: gen-data, train, infer, eval.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace avid
