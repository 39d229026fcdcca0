#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

namespace cloudatelier::log {

enum class Level { kDebug, kInfo, kWarn, kError };

/// Human-readable lines on stderr by default; NDJSON records when enabled.
void set_json(bool enabled);
void set_level(Level level);
/// Disables all output (tests).
void set_quiet(bool quiet);

void write(Level level, std::string_view message, const nlohmann::json& fields = nlohmann::json::object());

inline void info(std::string_view message, const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::kInfo, message, fields);
}
inline void warn(std::string_view message, const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::kWarn, message, fields);
}
inline void error(std::string_view message, const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::kError, message, fields);
}
inline void debug(std::string_view message, const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::kDebug, message, fields);
}

}  // namespace cloudatelier::log
