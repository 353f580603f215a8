#include "semfill/log.hpp"

namespace semfill::log {

Level& threshold() {
  static Level level = Level::Info;
  return level;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace semfill::log
