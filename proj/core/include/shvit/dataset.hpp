#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "shvit/image.hpp"
#include "shvit/reid_eval.hpp"

namespace shvit {

/// Parses a Market-1501 style name "<id>_c<cam>s<seq>_<frame>_<idx>.<ext>",
/// e.g. "0001_c1s1_000151_00.jpg". The id is a digit string or "-1" (junk).
/// Throws DataError naming the offending segment.
SampleMeta parse_reid_filename(std::string_view name);

enum class SplitName { train, query, gallery, val };

std::string to_string(SplitName split);
SplitName split_from_string(const std::string& name);
/// bounding_box_train, query, bounding_box_test, val.
std::string split_directory(SplitName split);

struct DatasetSplit {
  SplitName name = SplitName::train;
  std::vector<SampleMeta> samples;  ///< sorted by file name
  std::size_t skipped = 0;          ///< malformed names skipped in lenient mode

  std::size_t num_identities() const;
};

/// Reads `<root>/<split dir>/*.ppm`. Files without the .ppm extension are
/// ignored. A malformed name is a DataError in strict mode, and a logged skip
/// otherwise. Empty or missing directories are DataErrors.
DatasetSplit load_split(const std::string& root, SplitName split, bool strict = true);
/// Same, for an explicit directory.
DatasetSplit load_directory(const std::string& dir, bool strict = true);

std::vector<Image> load_images(const std::vector<SampleMeta>& samples);

/// Dense class indices for the distinct non-junk identities, ascending id.
struct LabelMap {
  std::vector<int> identities;
  std::size_t index_of(int identity) const;
  std::size_t size() const { return identities.size(); }
};
LabelMap build_label_map(const std::vector<SampleMeta>& samples);

}  // namespace shvit
