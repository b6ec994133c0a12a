#include "toporisk/logging.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "toporisk/error.hpp"

namespace toporisk {

void init_logging() {
  static auto logger = [] {
    auto l = spdlog::stderr_color_mt("topo-risk");
    l->set_pattern("[%l] %v");
    spdlog::set_default_logger(l);
    return l;
  }();
  const char* env = std::getenv("TOPO_RISK_LOG");
  const std::string level = env ? env : "info";
  if (level == "error")
    logger->set_level(spdlog::level::err);
  else if (level == "info" || level.empty())
    logger->set_level(spdlog::level::info);
  else if (level == "debug")
    logger->set_level(spdlog::level::debug);
  else
    throw ConfigError("TOPO_RISK_LOG must be error, info or debug, got '" + level + "'");
}

}  // namespace toporisk
