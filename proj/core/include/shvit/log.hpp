#pragma once

#include <string_view>

namespace shvit::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

// Messages go to standard error. Machine-readable artifacts never pass
// through here.
void set_level(Level level);
Level level();

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

/// Number of warnings emitted since start-up; tests use it to observe
/// "warn and continue" paths.
unsigned long warning_count();

}  // namespace shvit::log
