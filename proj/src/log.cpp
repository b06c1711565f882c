#include "ssde/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace ssde::log {

namespace {

spdlog::logger& logger() {
  static auto instance = [] {
    auto l = spdlog::stderr_logger_st("ssde");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::err);
    return l;
  }();
  return *instance;
}

}  // namespace

void init_from_env() {
  const char* env = std::getenv("SSDE_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    logger().set_level(spdlog::level::debug);
  } else if (level == "info") {
    logger().set_level(spdlog::level::info);
  } else {
    logger().set_level(spdlog::level::err);
  }
}

void error(std::string_view msg) { logger().error("{}", msg); }
void info(std::string_view msg) { logger().info("{}", msg); }
void debug(std::string_view msg) { logger().debug("{}", msg); }

}  // namespace ssde::log
