#include "shvit/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>

#include "shvit/error.hpp"
#include "shvit/log.hpp"
#include "shvit/ppm.hpp"

namespace shvit {
namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

int to_int(std::string_view s, std::string_view name, const char* segment) {
  if (s.size() > 9) throw DataError("filename '" + std::string(name) + "': " + segment + " '" + std::string(s) + "' too long");
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

[[noreturn]] void bad(std::string_view name, const std::string& what) {
  throw DataError("filename '" + std::string(name) + "': " + what);
}

}  // namespace

SampleMeta parse_reid_filename(std::string_view name) {
  const std::size_t dot = name.rfind('.');
  if (dot == std::string_view::npos || dot + 1 == name.size()) bad(name, "missing extension");
  const std::string_view ext = name.substr(dot + 1);
  if (!std::all_of(ext.begin(), ext.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); }))
    bad(name, "bad extension '" + std::string(ext) + "'");
  const std::string_view stem = name.substr(0, dot);

  std::vector<std::string_view> parts;
  std::size_t start = 0;
  // A leading "-1" contains no underscore, so a plain split is unambiguous.
  while (true) {
    const std::size_t us = stem.find('_', start);
    parts.push_back(stem.substr(start, us == std::string_view::npos ? std::string_view::npos : us - start));
    if (us == std::string_view::npos) break;
    start = us + 1;
  }
  if (parts.size() != 4)
    bad(name, "expected 4 '_'-separated segments <id>_c<cam>s<seq>_<frame>_<idx>, got " + std::to_string(parts.size()));

  SampleMeta meta;
  meta.path = std::string(name);
  if (parts[0] == "-1") {
    meta.identity = -1;
  } else if (all_digits(parts[0])) {
    meta.identity = to_int(parts[0], name, "identity");
  } else {
    bad(name, "identity segment '" + std::string(parts[0]) + "' is not a number or -1");
  }

  const std::string_view cs = parts[1];
  const std::size_t s_pos = cs.find('s');
  if (cs.size() < 4 || cs[0] != 'c' || s_pos == std::string_view::npos || !all_digits(cs.substr(1, s_pos - 1)) ||
      !all_digits(cs.substr(s_pos + 1)))
    bad(name, "camera/sequence segment '" + std::string(cs) + "' is not c<cam>s<seq>");
  meta.camera = to_int(cs.substr(1, s_pos - 1), name, "camera");
  if (meta.camera < 1) bad(name, "camera segment '" + std::string(cs) + "' has camera id 0");

  if (!all_digits(parts[2])) bad(name, "frame segment '" + std::string(parts[2]) + "' is not a number");
  if (!all_digits(parts[3])) bad(name, "index segment '" + std::string(parts[3]) + "' is not a number");
  return meta;
}

std::string to_string(SplitName split) {
  switch (split) {
    case SplitName::train: return "train";
    case SplitName::query: return "query";
    case SplitName::gallery: return "gallery";
    case SplitName::val: return "val";
  }
  return "train";
}

SplitName split_from_string(const std::string& name) {
  if (name == "train") return SplitName::train;
  if (name == "query") return SplitName::query;
  if (name == "gallery") return SplitName::gallery;
  if (name == "val") return SplitName::val;
  throw ConfigError("unknown split '" + name + "' (expected train, query, gallery or val)");
}

std::string split_directory(SplitName split) {
  switch (split) {
    case SplitName::train: return "bounding_box_train";
    case SplitName::query: return "query";
    case SplitName::gallery: return "bounding_box_test";
    case SplitName::val: return "val";
  }
  return "bounding_box_train";
}

std::size_t DatasetSplit::num_identities() const {
  std::set<int> ids;
  for (const auto& s : samples)
    if (s.identity != -1) ids.insert(s.identity);
  return ids.size();
}

DatasetSplit load_directory(const std::string& dir, bool strict) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("dataset directory not found: " + dir);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() != ".ppm") continue;
    names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  DatasetSplit split;
  for (const std::string& n : names) {
    try {
      SampleMeta m = parse_reid_filename(n);
      m.path = (fs::path(dir) / n).string();
      split.samples.push_back(std::move(m));
    } catch (const DataError& e) {
      if (strict) throw;
      ++split.skipped;
      log::warn(std::string("skipping ") + e.what());
    }
  }
  if (split.samples.empty()) throw DataError("no samples in " + dir);
  log::debug(dir + ": " + std::to_string(split.samples.size()) + " samples, " +
             std::to_string(split.num_identities()) + " identities");
  return split;
}

DatasetSplit load_split(const std::string& root, SplitName name, bool strict) {
  DatasetSplit s = load_directory((std::filesystem::path(root) / split_directory(name)).string(), strict);
  s.name = name;
  return s;
}

std::vector<Image> load_images(const std::vector<SampleMeta>& samples) {
  std::vector<Image> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(decode_image(s.path));
  return out;
}

std::size_t LabelMap::index_of(int identity) const {
  const auto it = std::lower_bound(identities.begin(), identities.end(), identity);
  if (it == identities.end() || *it != identity)
    throw DataError("identity " + std::to_string(identity) + " not in the training label map");
  return static_cast<std::size_t>(it - identities.begin());
}

LabelMap build_label_map(const std::vector<SampleMeta>& samples) {
  std::set<int> ids;
  for (const auto& s : samples)
    if (s.identity != -1) ids.insert(s.identity);
  return LabelMap{std::vector<int>(ids.begin(), ids.end())};
}

}  // namespace shvit
