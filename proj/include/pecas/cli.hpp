#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace pecas::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand (train, eval, detect, run, gradcheck). `args` excludes
/// the program name. Returns 0 on success, 1 on a runtime failure and 2 on a
/// usage or configuration error.
int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace pecas::cli
