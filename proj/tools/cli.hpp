#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace seedmix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs one command. Progress and errors go to `err`, machine output to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seedmix::cli
