#include "shvit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "shvit/error.hpp"
#include "shvit/log.hpp"

namespace shvit {

Tensor to_tensor(const Image& img) {
  return Tensor(Shape{img.channels, img.height, img.width}, img.pixels);
}

// ---------------------------------------------------------------------------

void StatsAccumulator::add(const Image& img) {
  if (img.channels != 3) throw DataError("dataset stats: expected 3-channel images");
  const std::size_t n = img.plane();
  if (n == 0) return;
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, m2 = 0.0;
    const double* p = &img.pixels[c * n];
    for (std::size_t i = 0; i < n; ++i) {
      const double delta = p[i] - mean;
      mean += delta / static_cast<double>(i + 1);
      m2 += delta * (p[i] - mean);
    }
    const double na = static_cast<double>(count_), nb = static_cast<double>(n);
    const double total = na + nb;
    const double delta = mean - mean_[c];
    mean_[c] += delta * nb / total;
    m2_[c] += m2 + delta * delta * na * nb / total;
  }
  count_ += n;
}

ChannelStats StatsAccumulator::finish() const {
  if (count_ == 0) throw DataError("dataset stats: no images");
  ChannelStats s;
  for (std::size_t c = 0; c < 3; ++c) {
    s.mean[c] = mean_[c];
    s.std[c] = std::sqrt(std::max(0.0, m2_[c] / static_cast<double>(count_)));
    s.zero_std[c] = s.std[c] == 0.0;
  }
  return s;
}

ChannelStats compute_dataset_stats(std::span<const Image> images) {
  StatsAccumulator acc;
  for (const Image& img : images) acc.add(img);
  return acc.finish();
}

Image normalize(const Image& img, const ChannelStats& stats) {
  Image out = img;
  const std::size_t n = img.plane();
  for (std::size_t c = 0; c < img.channels; ++c) {
    if (!(stats.std[c] > 0.0))
      throw DataError("normalize: channel " + std::to_string(c) + " has zero standard deviation");
    for (std::size_t i = 0; i < n; ++i)
      out.pixels[c * n + i] = (img.pixels[c * n + i] - stats.mean[c]) / stats.std[c];
  }
  return out;
}

Image denormalize(const Image& img, const ChannelStats& stats) {
  Image out = img;
  const std::size_t n = img.plane();
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t i = 0; i < n; ++i)
      out.pixels[c * n + i] = img.pixels[c * n + i] * stats.std[c] + stats.mean[c];
  return out;
}

// ---------------------------------------------------------------------------

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* key) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(key) + " must be in [0, 1]");
  };
  auto range = [](double lo, double hi, const char* key) {
    if (!(lo <= hi)) throw ConfigError(std::string(key) + ": min exceeds max");
  };
  prob(p_affine, "augment.p_affine");
  prob(p_perspective, "augment.p_perspective");
  prob(p_color, "augment.p_color");
  prob(p_blur, "augment.p_blur");
  prob(p_erase, "augment.p_erase");
  range(erase_area_min, erase_area_max, "augment.erase_area");
  if (!(erase_area_min > 0.0 && erase_area_max <= 1.0))
    throw ConfigError("augment.erase_area must lie in (0, 1]");
  range(erase_aspect_min, erase_aspect_max, "augment.erase_aspect");
  if (!(erase_aspect_min > 0.0)) throw ConfigError("augment.erase_aspect must be positive");
  range(blur_sigma_min, blur_sigma_max, "augment.blur_sigma");
  if (blur_sigma_min < 0.0) throw ConfigError("augment.blur_sigma must be nonnegative");
  if (affine_rotation_deg < 0.0 || affine_translate < 0.0 || perspective_distortion < 0.0)
    throw ConfigError("augment: rotation, translation and distortion ranges must be nonnegative");
  range(affine_scale_min, affine_scale_max, "augment.affine_scale");
  if (!(affine_scale_min > 0.0)) throw ConfigError("augment.affine_scale must be positive");
  range(brightness_min, brightness_max, "augment.brightness");
  range(contrast_min, contrast_max, "augment.contrast");
  range(saturation_min, saturation_max, "augment.saturation");
  if (brightness_min < 0.0 || contrast_min < 0.0 || saturation_min < 0.0)
    throw ConfigError("augment: color factors must be nonnegative");
  for (std::size_t c = 0; c < 3; ++c)
    if (!(stats.std[c] > 0.0)) throw ConfigError("augment.std must be positive");
}

// ---------------------------------------------------------------------------

EraseResult random_erase(const Image& img, const AugmentConfig& cfg, Rng& rng) {
  EraseResult res{img, std::nullopt};
  if (!rng.bernoulli(cfg.p_erase)) return res;
  const std::size_t H = img.height, W = img.width;
  const double area = static_cast<double>(H * W);
  constexpr int kMaxAttempts = 10;
  const double log_lo = std::log(cfg.erase_aspect_min), log_hi = std::log(cfg.erase_aspect_max);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const double target = rng.uniform(cfg.erase_area_min, cfg.erase_area_max) * area;
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto h = static_cast<std::size_t>(std::llround(std::sqrt(target * aspect)));
    const auto w = static_cast<std::size_t>(std::llround(std::sqrt(target / aspect)));
    if (h < 1 || w < 1 || h > H || w > W) continue;
    // Rounding to whole pixels can leave the configured bounds; redraw then.
    const double frac = static_cast<double>(h * w) / area;
    const double ratio = static_cast<double>(h) / static_cast<double>(w);
    if (frac < cfg.erase_area_min || frac > cfg.erase_area_max) continue;
    if (ratio < cfg.erase_aspect_min || ratio > cfg.erase_aspect_max) continue;
    EraseRect r{rng.uniform_index(H - h + 1), rng.uniform_index(W - w + 1), h, w};
    for (std::size_t c = 0; c < img.channels; ++c)
      for (std::size_t y = r.top; y < r.top + h; ++y)
        for (std::size_t x = r.left; x < r.left + w; ++x)
          res.image.at(c, y, x) = cfg.erase_fill == EraseFill::noise ? rng.uniform() : cfg.stats.mean[c];
    res.rect = r;
    return res;
  }
  log::warn("random_erase: no feasible rectangle for " + std::to_string(H) + "x" + std::to_string(W) +
            " image within the configured area/aspect ranges; left unchanged");
  return res;
}

// ---------------------------------------------------------------------------

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw ConfigError("gaussian_kernel: sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double s = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    s += v;
  }
  for (double& v : k) v /= s;
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma >= 0.0)) throw ConfigError("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
  const auto H = static_cast<std::ptrdiff_t>(img.height), W = static_cast<std::ptrdiff_t>(img.width);
  auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t hi) { return std::clamp<std::ptrdiff_t>(v, 0, hi - 1); };
  Image tmp = img, out = img;
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::ptrdiff_t y = 0; y < H; ++y)
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        double s = 0.0;
        for (std::ptrdiff_t i = -r; i <= r; ++i)
          s += k[static_cast<std::size_t>(i + r)] *
               img.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(clampi(x + i, W)));
        tmp.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s;
      }
    for (std::ptrdiff_t y = 0; y < H; ++y)
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        double s = 0.0;
        for (std::ptrdiff_t i = -r; i <= r; ++i)
          s += k[static_cast<std::size_t>(i + r)] *
               tmp.at(c, static_cast<std::size_t>(clampi(y + i, H)), static_cast<std::size_t>(x));
        out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s;
      }
  }
  return out;
}

// ---------------------------------------------------------------------------

Mat3 mat3_identity() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return r;
}

std::optional<Mat3> mat3_inverse(const Mat3& m) {
  const double a = m[0], b = m[1], c = m[2], d = m[3], e = m[4], f = m[5], g = m[6], h = m[7], i = m[8];
  const double A = e * i - f * h, B = -(d * i - f * g), C = d * h - e * g;
  const double det = a * A + b * B + c * C;
  double scale = 0.0;
  for (double v : m) scale = std::max(scale, std::abs(v));
  if (!std::isfinite(det) || std::abs(det) <= 1e-12 * scale * scale * scale) return std::nullopt;
  const double inv = 1.0 / det;
  return Mat3{A * inv, -(b * i - c * h) * inv, (b * f - c * e) * inv,
              B * inv, (a * i - c * g) * inv,  -(a * f - c * d) * inv,
              C * inv, -(a * h - b * g) * inv, (a * e - b * d) * inv};
}

Mat3 affine_matrix(const AffineParams& p, std::size_t height, std::size_t width) {
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double th = p.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(th) * p.scale, sn = std::sin(th) * p.scale;
  const Mat3 to_origin{1, 0, -cx, 0, 1, -cy, 0, 0, 1};
  const Mat3 rot_scale{cs, -sn, 0, sn, cs, 0, 0, 0, 1};
  const Mat3 back{1, 0, cx + p.translate_x, 0, 1, cy + p.translate_y, 0, 0, 1};
  return mat3_mul(back, mat3_mul(rot_scale, to_origin));
}

std::optional<Mat3> perspective_matrix(const PerspectiveParams& p, std::size_t height, std::size_t width) {
  const double w1 = static_cast<double>(width) - 1.0, h1 = static_cast<double>(height) - 1.0;
  const std::array<double, 4> sx{0.0, w1, w1, 0.0}, sy{0.0, 0.0, h1, h1};
  // Solve for h00..h21 (h22 = 1): for each corner,
  //   u = (h00 x + h01 y + h02) / (h20 x + h21 y + 1), likewise v.
  double a[8][9] = {};
  for (int k = 0; k < 4; ++k) {
    const double x = sx[k], y = sy[k], u = sx[k] + p.dx[k], v = sy[k] + p.dy[k];
    double* r0 = a[2 * k];
    double* r1 = a[2 * k + 1];
    r0[0] = x, r0[1] = y, r0[2] = 1, r0[6] = -u * x, r0[7] = -u * y, r0[8] = u;
    r1[3] = x, r1[4] = y, r1[5] = 1, r1[6] = -v * x, r1[7] = -v * y, r1[8] = v;
  }
  for (int col = 0; col < 8; ++col) {
    int piv = col;
    for (int r = col + 1; r < 8; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-12) return std::nullopt;
    if (piv != col)
      for (int j = 0; j < 9; ++j) std::swap(a[piv][j], a[col][j]);
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int j = col; j < 9; ++j) a[r][j] -= f * a[col][j];
    }
  }
  Mat3 m{};
  for (int i = 0; i < 8; ++i) m[static_cast<std::size_t>(i)] = a[i][8] / a[i][i];
  m[8] = 1.0;
  if (!mat3_inverse(m)) return std::nullopt;
  return m;
}

namespace {

// Coordinates within this distance of an integer are sampled at that
// integer, so exact transforms (identity, quarter turns) stay exact.
constexpr double kSnap = 1e-9;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kSnap ? r : v;
}

}  // namespace

Image warp(const Image& img, const Mat3& forward) {
  const auto inv = mat3_inverse(forward);
  if (!inv) throw ConfigError("warp: transform is not invertible");
  const Mat3& m = *inv;
  const std::size_t H = img.height, W = img.width, n = img.plane();
  std::array<double, 3> fill{};
  for (std::size_t c = 0; c < img.channels && c < 3; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += img.pixels[c * n + i];
    fill[c] = s / static_cast<double>(n);
  }
  Image out(img.channels, H, W);
  const double xmax = static_cast<double>(W) - 1.0, ymax = static_cast<double>(H) - 1.0;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double X = static_cast<double>(x), Y = static_cast<double>(y);
      const double z = m[6] * X + m[7] * Y + m[8];
      double sx = (m[0] * X + m[1] * Y + m[2]) / z;
      double sy = (m[3] * X + m[4] * Y + m[5]) / z;
      sx = snap(sx);
      sy = snap(sy);
      if (!(z > 0.0) || !(sx >= 0.0 && sx <= xmax && sy >= 0.0 && sy <= ymax)) {
        for (std::size_t c = 0; c < img.channels; ++c) out.at(c, y, x) = fill[c];
        continue;
      }
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const auto y0 = static_cast<std::size_t>(std::floor(sy));
      const std::size_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      for (std::size_t c = 0; c < img.channels; ++c) {
        if (fx == 0.0 && fy == 0.0) {
          out.at(c, y, x) = img.at(c, y0, x0);
          continue;
        }
        const double top = img.at(c, y0, x0) * (1.0 - fx) + img.at(c, y0, x1) * fx;
        const double bot = img.at(c, y1, x0) * (1.0 - fx) + img.at(c, y1, x1) * fx;
        out.at(c, y, x) = top * (1.0 - fy) + bot * fy;
      }
    }
  return out;
}

Image geometric_transform(const Image& img, WarpKind kind, const AugmentConfig& cfg, Rng& rng) {
  constexpr int kMaxAttempts = 10;
  const double W = static_cast<double>(img.width), H = static_cast<double>(img.height);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::optional<Mat3> m;
    if (kind == WarpKind::affine) {
      AffineParams p;
      p.rotation_deg = rng.uniform(-cfg.affine_rotation_deg, cfg.affine_rotation_deg);
      p.scale = rng.uniform(cfg.affine_scale_min, cfg.affine_scale_max);
      p.translate_x = rng.uniform(-cfg.affine_translate, cfg.affine_translate) * W;
      p.translate_y = rng.uniform(-cfg.affine_translate, cfg.affine_translate) * H;
      m = affine_matrix(p, img.height, img.width);
      if (!mat3_inverse(*m)) m.reset();
    } else {
      PerspectiveParams p;
      for (std::size_t k = 0; k < 4; ++k) {
        p.dx[k] = rng.uniform(-cfg.perspective_distortion, cfg.perspective_distortion) * W;
        p.dy[k] = rng.uniform(-cfg.perspective_distortion, cfg.perspective_distortion) * H;
      }
      m = perspective_matrix(p, img.height, img.width);
    }
    if (m) return warp(img, *m);
  }
  log::warn("geometric_transform: no invertible transform drawn; image left unchanged");
  return img;
}

// ---------------------------------------------------------------------------

Image color_adjust(const Image& img, const ColorParams& params) {
  if (img.channels != 3) throw DataError("color_adjust: expected an RGB image");
  Image out = img;
  const std::size_t n = img.plane();
  auto px = [&](std::size_t c, std::size_t i) -> double& { return out.pixels[c * n + i]; };
  auto luma = [&](std::size_t i) {
    return kLumaWeights[0] * px(0, i) + kLumaWeights[1] * px(1, i) + kLumaWeights[2] * px(2, i);
  };
  if (params.brightness != 1.0)
    for (double& v : out.pixels) v *= params.brightness;
  if (params.contrast != 1.0) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += luma(i);
    m /= static_cast<double>(n);
    for (double& v : out.pixels) v = m + params.contrast * (v - m);
  }
  if (params.saturation != 1.0)
    for (std::size_t i = 0; i < n; ++i) {
      const double y = luma(i);
      for (std::size_t c = 0; c < 3; ++c) px(c, i) = y + params.saturation * (px(c, i) - y);
    }
  for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Image color_adjust(const Image& img, const AugmentConfig& cfg, Rng& rng) {
  ColorParams p;
  p.brightness = rng.uniform(cfg.brightness_min, cfg.brightness_max);
  p.contrast = rng.uniform(cfg.contrast_min, cfg.contrast_max);
  p.saturation = rng.uniform(cfg.saturation_min, cfg.saturation_max);
  return color_adjust(img, p);
}

// ---------------------------------------------------------------------------

Image apply_pipeline(const Image& img, const AugmentConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return normalize(img, cfg.stats);
  Image x = img;
  if (rng.bernoulli(cfg.p_affine)) x = geometric_transform(x, WarpKind::affine, cfg, rng);
  if (rng.bernoulli(cfg.p_perspective)) x = geometric_transform(x, WarpKind::perspective, cfg, rng);
  if (rng.bernoulli(cfg.p_color)) x = color_adjust(x, cfg, rng);
  if (rng.bernoulli(cfg.p_blur)) x = gaussian_blur(x, rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max));
  x = random_erase(x, cfg, rng).image;
  return normalize(x, cfg.stats);
}

}  // namespace shvit
