#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "shvit/image.hpp"
#include "shvit/rng.hpp"

namespace shvit {

// ---------------------------------------------------------------------------
// Dataset statistics and normalization

struct ChannelStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};
  /// Channels whose population standard deviation is exactly zero.
  std::array<bool, 3> zero_std{false, false, false};
};

/// Single-pass per-channel mean and population standard deviation. Images
/// are folded in one at a time with Welford's update, and images combine with
/// Chan et al.'s pairwise merge, so the order of images barely matters.
class StatsAccumulator {
 public:
  void add(const Image& img);
  std::size_t count() const { return count_; }
  /// Throws DataError when no pixel has been seen.
  ChannelStats finish() const;

 private:
  std::size_t count_ = 0;
  std::array<double, 3> mean_{};
  std::array<double, 3> m2_{};
};

ChannelStats compute_dataset_stats(std::span<const Image> images);

/// (pixel - mean) / std per channel; throws on a zero std.
Image normalize(const Image& img, const ChannelStats& stats);
Image denormalize(const Image& img, const ChannelStats& stats);

// ---------------------------------------------------------------------------
// Transform parameters

enum class EraseFill { noise, mean };

struct AugmentConfig {
  bool enabled = true;
  double p_affine = 0.5;
  double p_perspective = 0.5;
  double p_color = 0.5;
  double p_blur = 0.5;
  double p_erase = 0.5;

  double erase_area_min = 0.02;
  double erase_area_max = 0.2;
  double erase_aspect_min = 0.3;
  double erase_aspect_max = 3.3;
  EraseFill erase_fill = EraseFill::noise;

  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;

  double affine_rotation_deg = 10.0;  // +/- range
  double affine_translate = 0.1;      // +/- fraction of width/height
  double affine_scale_min = 0.9;
  double affine_scale_max = 1.1;
  double perspective_distortion = 0.1;  // max corner displacement, fraction of size

  double brightness_min = 0.8, brightness_max = 1.2;
  double contrast_min = 0.8, contrast_max = 1.2;
  double saturation_min = 0.8, saturation_max = 1.2;

  ChannelStats stats;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Random erasing

struct EraseRect {
  std::size_t top = 0, left = 0, height = 0, width = 0;
};

struct EraseResult {
  Image image;
  std::optional<EraseRect> rect;
};

/// With probability cfg.p_erase, fills one rectangle whose area fraction is
/// in [erase_area_min, erase_area_max] and whose aspect ratio (h/w) is in
/// [erase_aspect_min, erase_aspect_max]. Gives up (identity plus warning)
/// after a bounded number of infeasible draws.
EraseResult random_erase(const Image& img, const AugmentConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Gaussian blur

/// Normalized sampled Gaussian, radius ceil(3 sigma); {1} for sigma == 0.
std::vector<double> gaussian_kernel(double sigma);

/// Separable convolution with clamp-to-edge borders. sigma == 0 is identity.
Image gaussian_blur(const Image& img, double sigma);

// ---------------------------------------------------------------------------
// Geometric warps

/// Row-major 3x3 homogeneous transform mapping source pixel coordinates
/// (x, y, 1) to destination coordinates.
using Mat3 = std::array<double, 9>;

Mat3 mat3_identity();
Mat3 mat3_mul(const Mat3& a, const Mat3& b);
std::optional<Mat3> mat3_inverse(const Mat3& m);

enum class WarpKind { affine, perspective };

struct AffineParams {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double translate_x = 0.0;  // pixels
  double translate_y = 0.0;
};

/// Displacement of the four corners (top-left, top-right, bottom-right,
/// bottom-left), in pixels.
struct PerspectiveParams {
  std::array<double, 4> dx{};
  std::array<double, 4> dy{};
};

/// Rotation and scale about the image center, then translation.
Mat3 affine_matrix(const AffineParams& p, std::size_t height, std::size_t width);
/// Homography taking the image corners to the displaced corners.
std::optional<Mat3> perspective_matrix(const PerspectiveParams& p, std::size_t height, std::size_t width);

/// Inverse-mapped warp with bilinear sampling. Destination pixels whose
/// source lies outside the image take the channel mean of `img`. Throws
/// when `forward` is not invertible.
Image warp(const Image& img, const Mat3& forward);

/// Draws a transform of `kind` within the configured ranges and applies it.
/// Non-invertible draws are rejected and redrawn (bounded).
Image geometric_transform(const Image& img, WarpKind kind, const AugmentConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Color

/// ITU-R BT.601 luma weights.
inline constexpr std::array<double, 3> kLumaWeights{0.299, 0.587, 0.114};

struct ColorParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
};

/// brightness: x * b; contrast: m + c (x - m) with m the image's mean luma;
/// saturation: y + s (x - y) with y the pixel's luma. Applied in that order,
/// then clamped to [0, 1].
Image color_adjust(const Image& img, const ColorParams& params);
Image color_adjust(const Image& img, const AugmentConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Pipeline

/// geometric (affine, then perspective) -> color -> blur -> erase -> normalize.
/// Each stage is gated by its own probability draw from `rng`; the result is a
/// pure function of (img, cfg, rng state).
Image apply_pipeline(const Image& img, const AugmentConfig& cfg, Rng& rng);

}  // namespace shvit
