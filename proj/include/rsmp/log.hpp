#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace rsmp {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Reads ROBUST_SMP_LOG (error | info | debug) once; defaults to error.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ROBUST_SMP_LOG");
    if (!env) return LogLevel::Error;
    const std::string value(env);
    if (value == "debug") return LogLevel::Debug;
    if (value == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return level;
}

inline void log(LogLevel level, const std::string& message) {
  if (level > log_level()) return;
  const char* tag = level == LogLevel::Error ? "error" : level == LogLevel::Info ? "info" : "debug";
  std::cerr << "[" << tag << "] " << message << "\n";
}

}  // namespace rsmp
