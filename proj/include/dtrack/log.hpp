#pragma once

#include <spdlog/spdlog.h>

namespace dtrack {

// Reads DTRACK_LOG (error|info|debug) and configures the default logger.
// Unknown or missing values fall back to "info".
void init_logging();

}  // namespace dtrack
