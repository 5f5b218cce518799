#include "stgan/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_sinks.h>

namespace stgan::log {

void init_from_env() {
  static bool sink_installed = false;
  if (!sink_installed) {
    spdlog::set_default_logger(spdlog::stderr_logger_st("stgan"));
    spdlog::set_pattern("[%l] %v");
    sink_installed = true;
  }
  const char* env = std::getenv("STGAN_LOG");
  const std::string_view level = env ? env : "info";
  if (level == "quiet") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

}  // namespace stgan::log
