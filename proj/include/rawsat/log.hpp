#pragma once

#include <string_view>

#include <nlohmann/json.hpp>

namespace rawsat {

enum class LogLevel { Off, Error, Warn, Info, Debug };

// Initialized from RAWSAT_LOG (off | error | warn | info | debug), default
// warn. Unknown values fall back to the default.
LogLevel log_level();
void set_log_level(LogLevel level);
LogLevel parse_log_level(std::string_view name, LogLevel fallback);

// One JSON object per line on stderr: {"level", "event", ...fields}.
void log_event(LogLevel level, std::string_view event, const nlohmann::json& fields = nlohmann::json::object());

}  // namespace rawsat
