#include "shvit/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace shvit::log {
namespace {

std::atomic<Level> g_level{Level::info};
std::atomic<unsigned long> g_warnings{0};
std::mutex g_mutex;

void emit(Level lvl, std::string_view tag, std::string_view msg) {
  if (lvl < g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[shvit " << tag << "] " << msg << '\n';
}

}  // namespace

void set_level(Level lvl) { g_level.store(lvl); }
Level level() { return g_level.load(); }

void debug(std::string_view msg) { emit(Level::debug, "debug", msg); }
void info(std::string_view msg) { emit(Level::info, "info", msg); }
void warn(std::string_view msg) {
  ++g_warnings;
  emit(Level::warn, "warn", msg);
}
void error(std::string_view msg) { emit(Level::error, "error", msg); }

unsigned long warning_count() { return g_warnings.load(); }

}  // namespace shvit::log
