#include "shvit/version.hpp"

#ifndef SHVIT_VERSION
#define SHVIT_VERSION "0.0.0"
#endif

namespace shvit {

std::string version() { return SHVIT_VERSION; }

}  // namespace shvit
