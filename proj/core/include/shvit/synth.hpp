#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "shvit/image.hpp"

namespace shvit {

/// Procedural person-like dataset in Market-1501 layout.
///
/// Each identity has an upper/lower body color pair and a stripe texture;
/// each camera applies its own tint and blur; each image adds jitter, pixel
/// noise and, sometimes, an occluding block.
struct SynthConfig {
  std::size_t num_ids = 10;   ///< training identities, ids 1..num_ids
  std::size_t per_id = 8;     ///< training images per identity
  std::size_t cameras = 2;
  std::size_t height = 16;
  std::size_t width = 8;
  std::uint64_t seed = 0;

  /// Query/gallery identities (none by default). With heldout_same_ids they
  /// reuse the training identities 1..test_ids (fresh images); otherwise they
  /// are new identities numbered after the training ones.
  std::size_t test_ids = 0;
  std::size_t test_per_id = 4;  ///< image k goes to camera (k % cameras) + 1; k = 0 is the query
  bool heldout_same_ids = false;
  /// Extra held-out images of every training identity, written to val/.
  std::size_t val_per_id = 0;

  double occlusion_prob = 0.3;

  void validate() const;
};

struct SynthSummary {
  std::size_t train = 0, query = 0, gallery = 0, val = 0;
};

/// Deterministic in `cfg` (the files are bytewise identical across runs).
Image render_synthetic(const SynthConfig& cfg, int identity, int camera, std::size_t image_index);

/// "%04d_c%ds1_%06d_00.ppm".
std::string synthetic_filename(int identity, int camera, std::size_t image_index);

SynthSummary generate_synthetic_dataset(const std::string& root, const SynthConfig& cfg);

}  // namespace shvit
