#include "dtrack/log.hpp"

#include <cstdlib>
#include <string_view>

namespace dtrack {

void init_logging() {
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("DTRACK_LOG")) {
    std::string_view v(env);
    if (v == "error") level = spdlog::level::err;
    else if (v == "debug") level = spdlog::level::debug;
  }
  spdlog::set_level(level);
  spdlog::set_pattern("[%l] %v");
}

}  // namespace dtrack
