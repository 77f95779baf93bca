#include "unsee/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace unsee {

void init_logging() {
  auto logger = spdlog::get("unsee");
  if (!logger) {
    logger = spdlog::stderr_color_mt("unsee");
    logger->set_pattern("[%l] %v");
  }
  spdlog::set_default_logger(logger);

  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("UNSEE_LOG")) {
    const std::string_view v(env);
    if (v == "error") level = spdlog::level::err;
    else if (v == "debug") level = spdlog::level::debug;
  }
  spdlog::set_level(level);
}

}  // namespace unsee
