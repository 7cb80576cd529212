#pragma once

#include <string>

namespace cardmatch {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Global level comes from CARDMATCH_LOG={error|warn|info|debug}, default info.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_error(const std::string& msg);
void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace cardmatch
