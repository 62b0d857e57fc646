#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fatigue {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the fatigue3cc tool. `args` excludes the program name.
/// Returns 0 on success, 1 for usage errors and invalid input, 2 for
/// runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fatigue
