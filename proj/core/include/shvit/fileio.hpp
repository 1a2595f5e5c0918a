#pragma once

#include <string>

namespace shvit {

/// Whole-file binary read; DataError when unreadable.
std::string read_file(const std::string& path);

/// Writes to "<path>.tmp" and renames over `path`, so readers see either
/// the old file or the complete new one.
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace shvit
