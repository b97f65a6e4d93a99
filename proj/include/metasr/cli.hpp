#pragma once

#include <string>
#include <vector>

namespace metasr {

// Command-line entry point. Exit codes: 0 success, 1 usage error,
// 2 runtime error. args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace metasr
