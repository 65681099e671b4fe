#include "tclsafe/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace tclsafe::log {
namespace {

std::atomic<Level> g_level{Level::warning};
std::mutex g_sink_mutex;

std::string_view tag(Level level) {
  switch (level) {
    case Level::error: return "error";
    case Level::warning: return "warning";
    case Level::info: return "info";
    case Level::debug: return "debug";
  }
  return "?";
}

}  // namespace

void set_level(Level level) { g_level.store(level); }

Level level() { return g_level.load(); }

void write(Level lvl, std::string_view message) {
  if (static_cast<int>(lvl) > static_cast<int>(g_level.load())) return;
  std::lock_guard lock(g_sink_mutex);
  std::cerr << "[" << tag(lvl) << "] " << message << '\n';
}

}  // namespace tclsafe::log
