#pragma once

#include <iostream>
#include <mutex>
#include <sstream>
#include <string_view>

namespace semfill::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

Level& threshold();
std::mutex& sink_mutex();

template <typename... Args>
void write(Level level, std::string_view tag, const Args&... args) {
  if (level < threshold()) return;
  std::ostringstream os;
  os << '[' << tag << "] ";
  (os << ... << args);
  os << '\n';
  std::lock_guard<std::mutex> lock(sink_mutex());
  std::cerr << os.str();
}

template <typename... Args> void debug(const Args&... a) { write(Level::Debug, "debug", a...); }
template <typename... Args> void info(const Args&... a) { write(Level::Info, "info", a...); }
template <typename... Args> void warn(const Args&... a) { write(Level::Warn, "warn", a...); }
template <typename... Args> void error(const Args&... a) { write(Level::Error, "error", a...); }

}  // namespace semfill::log
