#include "cloudatelier/log.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>

namespace cloudatelier::log {

namespace {

std::atomic<bool> g_json{false};
std::atomic<bool> g_quiet{false};
std::atomic<int> g_level{static_cast<int>(Level::kInfo)};
std::mutex g_mutex;

const char* level_name(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
  }
  return "info";
}

}  // namespace

void set_json(bool enabled) { g_json = enabled; }
void set_level(Level level) { g_level = static_cast<int>(level); }
void set_quiet(bool quiet) { g_quiet = quiet; }

void write(Level level, std::string_view message, const nlohmann::json& fields) {
  if (g_quiet || static_cast<int>(level) < g_level) return;
  std::string line;
  if (g_json) {
    nlohmann::json rec = fields.is_object() ? fields : nlohmann::json::object();
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    rec["ts"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    rec["level"] = level_name(level);
    rec["msg"] = message;
    line = rec.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  } else {
    line = std::string(level_name(level)) + ": " + std::string(message);
    if (fields.is_object()) {
      for (auto it = fields.begin(); it != fields.end(); ++it) {
        line += ' ' + it.key() + '=' + (it->is_string() ? it->get<std::string>() : it->dump());
      }
    }
  }
  line += '\n';
  std::lock_guard lock(g_mutex);
  std::fputs(line.c_str(), stderr);
}

}  // namespace cloudatelier::log
