#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mirror {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the mirror command. args excludes the program name.
//   0  success
//   1  a run was Aborted, replay diverged, or validation found problems
//   2  usage or configuration error
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mirror
