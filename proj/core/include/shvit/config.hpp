#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shvit/augment.hpp"
#include "shvit/distill.hpp"
#include "shvit/optim.hpp"
#include "shvit/reid_eval.hpp"
#include "shvit/shuffle.hpp"
#include "shvit/vit.hpp"

namespace shvit {

/// Everything a run needs, addressable by flat dotted keys such as
/// `shuffle.noise_sigma` or `optim.kind`.
struct RunConfig {
  std::string preset = "vit-tiny";
  ModelConfig model = ModelConfig::preset("vit-tiny");
  ShuffleConfig shuffle;
  AugmentConfig augment;
  DistillConfig distill;
  OptimizerConfig optim;

  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;

  std::string data_root;
  std::string stats_file;  ///< empty: compute from the training split
  bool strict = true;

  std::string output_dir = "run";

  Metric metric = Metric::cosine;
  std::size_t max_rank = 50;
  std::size_t eval_batch_size = 32;
  bool camera_filter = true;

  /// Throws ConfigError for unknown keys and unparsable values. Setting
  /// `model.preset` replaces every model.* field with the preset's values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  void validate() const;

  /// One `key = value` line per key, in keys() order. Feeding the text back
  /// through parse_config_text yields an identical config.
  std::string to_text() const;
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; '#' starts a comment; blank lines are ignored.
ConfigOverrides parse_config_lines(const std::string& text);
RunConfig parse_config_text(const std::string& text);

/// Precedence: overrides > file > preset defaults. The preset named in the
/// overrides (or else the file) is applied before any other key.
RunConfig resolve_config(const std::optional<std::string>& file, const ConfigOverrides& overrides);

/// Stats file: `mean=[r,g,b]`, `std=[r,g,b]` and an optional `zero_std=[0,0,1]`.
std::string format_stats(const ChannelStats& stats);
ChannelStats parse_stats(const std::string& text);
ChannelStats read_stats_file(const std::string& path);
void write_stats_file(const ChannelStats& stats, const std::string& path);

}  // namespace shvit
