#pragma once

#include <string>

namespace crossalpha {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

/// Current level; initialized once from CROSSALPHA_LOG (error|warn|info|debug).
LogLevel log_level();
void set_log_level(LogLevel level);

/// Writes "level: message" to stderr when `level` is enabled.
void log(LogLevel level, const std::string& message);

inline void log_error(const std::string& m) { log(LogLevel::error, m); }
inline void log_warn(const std::string& m) { log(LogLevel::warn, m); }
inline void log_info(const std::string& m) { log(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log(LogLevel::debug, m); }

}  // namespace crossalpha
