#include "cafv/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>

namespace cafv {
namespace {

std::optional<LogLevel> g_override;

LogLevel level_from_env() {
  const char* env = std::getenv("CAFV_LOG");
  if (env == nullptr) return LogLevel::Info;
  const std::string v(env);
  if (v == "error") return LogLevel::Error;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

void emit(const char* tag, const std::string& msg) {
  std::fprintf(stderr, "[cafv] %s %s\n", tag, msg.c_str());
}

}  // namespace

LogLevel log_level() {
  if (g_override.has_value()) return *g_override;
  return level_from_env();
}

void set_log_level(LogLevel level) { g_override = level; }

void log_error(const std::string& msg) { emit("error:", msg); }

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::Info) emit("info:", msg);
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::Debug) emit("debug:", msg);
}

}  // namespace cafv
