#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pollmgraph::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line (args[0] is the program name). Never throws.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Worker count from POLLMGRAPH_THREADS; unset or 0 means hardware concurrency.
std::size_t thread_budget();

}  // namespace pollmgraph::cli
