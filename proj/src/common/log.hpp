#pragma once

#include <functional>
#include <string_view>

namespace oope {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

using LogSink = std::function<void(LogLevel, std::string_view)>;

// Replaces the process-wide sink (default: warnings and errors to stderr). Returns
// the previous sink.
LogSink set_log_sink(LogSink sink);
void log(LogLevel level, std::string_view msg);

inline void log_info(std::string_view msg) { log(LogLevel::info, msg); }
inline void log_warn(std::string_view msg) { log(LogLevel::warn, msg); }

}  // namespace oope
