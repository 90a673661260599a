#pragma once

#include <string>
#include <vector>

#include "dtrack/error.hpp"

namespace dtrack::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

ExitCode exit_code_for(ErrorCode code);

// Full command line, argv[0] included.
int run(int argc, const char* const* argv);
// Arguments after the program name.
int run(const std::vector<std::string>& args);

}  // namespace dtrack::cli
