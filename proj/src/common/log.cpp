#include "common/log.hpp"

#include <cstdio>
#include <mutex>
#include <string>

namespace oope {

namespace {

std::mutex g_mu;

void stderr_sink(LogLevel level, std::string_view msg) {
  if (level < LogLevel::warn) return;
  const char* tag = level == LogLevel::warn ? "warning" : "error";
  std::fprintf(stderr, "oope: %s: %.*s\n", tag, static_cast<int>(msg.size()), msg.data());
}

LogSink& sink() {
  static LogSink s = stderr_sink;
  return s;
}

}  // namespace

LogSink set_log_sink(LogSink s) {
  std::lock_guard lock(g_mu);
  LogSink old = std::move(sink());
  sink() = s ? std::move(s) : LogSink(stderr_sink);
  return old;
}

void log(LogLevel level, std::string_view msg) {
  std::lock_guard lock(g_mu);
  sink()(level, msg);
}

}  // namespace oope
