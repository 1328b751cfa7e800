#include "crossalpha/log.hpp"

#include <cstdlib>
#include <iostream>

namespace crossalpha {

namespace {

LogLevel parse_env_level() {
  const char* env = std::getenv("CROSSALPHA_LOG");
  if (env == nullptr) return LogLevel::warn;
  const std::string v(env);
  if (v == "error") return LogLevel::error;
  if (v == "warn") return LogLevel::warn;
  if (v == "info") return LogLevel::info;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

LogLevel& level_ref() {
  static LogLevel level = parse_env_level();
  return level;
}

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

}  // namespace

LogLevel log_level() { return level_ref(); }

void set_log_level(LogLevel level) { level_ref() = level; }

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) <= static_cast<int>(level_ref())) {
    std::cerr << level_name(level) << ": " << message << "\n";
  }
}

}  // namespace crossalpha
