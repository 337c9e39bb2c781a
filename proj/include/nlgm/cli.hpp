#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nlgm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

// Runs one command. `args` excludes the program name. The rendered report
// goes to --out or `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nlgm::cli
