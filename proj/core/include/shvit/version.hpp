#pragma once

#include <string>

namespace shvit {

/// Library version, "major.minor.patch".
std::string version();

}  // namespace shvit
