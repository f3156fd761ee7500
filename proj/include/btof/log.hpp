#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace btof {

// Warnings go through one replaceable sink (stderr by default) so tests and the
// CLI can capture them.
using LogSink = std::function<void(const std::string&)>;

inline LogSink& log_sink() {
  static LogSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

inline void log_warning(const std::string& msg) {
  static std::mutex mu;
  std::lock_guard lock(mu);
  if (log_sink()) log_sink()(msg);
}

}  // namespace btof
