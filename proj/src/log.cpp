#include "rawsat/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace rawsat {

namespace {

constexpr const char* kNames[] = {"off", "error", "warn", "info", "debug"};

std::atomic<int>& level_slot() {
  static std::atomic<int> level = [] {
    const char* env = std::getenv("RAWSAT_LOG");
    return static_cast<int>(parse_log_level(env ? env : "", LogLevel::Warn));
  }();
  return level;
}

}  // namespace

LogLevel parse_log_level(std::string_view name, LogLevel fallback) {
  for (int i = 0; i < 5; ++i)
    if (name == kNames[i]) return static_cast<LogLevel>(i);
  return fallback;
}

LogLevel log_level() { return static_cast<LogLevel>(level_slot().load()); }
void set_log_level(LogLevel level) { level_slot().store(static_cast<int>(level)); }

void log_event(LogLevel level, std::string_view event, const nlohmann::json& fields) {
  if (level == LogLevel::Off || static_cast<int>(level) > level_slot().load()) return;
  nlohmann::json j{{"level", kNames[static_cast<int>(level)]}, {"event", event}};
  for (const auto& [k, v] : fields.items()) j[k] = v;
  const std::string line = j.dump() + "\n";
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::fputs(line.c_str(), stderr);
}

}  // namespace rawsat
