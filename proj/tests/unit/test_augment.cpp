#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shvit/augment.hpp"
#include "shvit/error.hpp"
#include "shvit/log.hpp"

using namespace shvit;
using oracle::random_image;

namespace {

AugmentConfig all_off() {
  AugmentConfig c;
  c.p_affine = c.p_perspective = c.p_color = c.p_blur = c.p_erase = 0.0;
  return c;
}

Image constant_image(std::size_t h, std::size_t w, double v) { return Image(3, h, w, v); }

}  // namespace

// ---------------------------------------------------------------------------
// statistics and normalization

TEST(Stats, ConstantImageHasZeroStdFlagged) {
  const std::vector<Image> imgs{constant_image(4, 4, 0.5)};
  const ChannelStats s = compute_dataset_stats(imgs);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(s.mean[c], 0.5);
    EXPECT_EQ(s.std[c], 0.0);
    EXPECT_TRUE(s.zero_std[c]);
  }
}

TEST(Stats, TwoConstantImages) {
  const std::vector<Image> imgs{constant_image(3, 5, 0.0), constant_image(3, 5, 1.0)};
  const ChannelStats s = compute_dataset_stats(imgs);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(s.mean[c], 0.5);
    EXPECT_DOUBLE_EQ(s.std[c], 0.5);
    EXPECT_FALSE(s.zero_std[c]);
  }
}

TEST(Stats, MatchesTwoPassOracle) {
  std::vector<Image> imgs;
  std::mt19937_64 eng(1);
  for (int i = 0; i < 100; ++i) imgs.push_back(random_image(4 + eng() % 5, 3 + eng() % 6, eng()));
  const ChannelStats s = compute_dataset_stats(imgs);
  const auto ref = oracle::two_pass_stats(imgs);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(s.mean[c], ref[c][0], 1e-10);
    EXPECT_NEAR(s.std[c], ref[c][1], 1e-10);
  }
}

TEST(Stats, EmptyInputThrows) {
  EXPECT_THROW(compute_dataset_stats({}), DataError);
}

TEST(Normalize, UnitStatsAreIdentity) {
  const Image img = random_image(5, 4, 2);
  EXPECT_EQ(normalize(img, ChannelStats{}), img);
}

TEST(Normalize, MeanImageMapsToZero) {
  ChannelStats s;
  s.mean = {0.2, 0.4, 0.6};
  s.std = {0.1, 0.2, 0.3};
  Image img(3, 2, 2);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 4; ++i) img.pixels[c * 4 + i] = s.mean[c];
  for (double v : normalize(img, s).pixels) EXPECT_EQ(v, 0.0);
}

TEST(Normalize, RoundTrip) {
  ChannelStats s;
  s.mean = {0.45, 0.5, 0.41};
  s.std = {0.27, 0.22, 0.3};
  const Image img = random_image(6, 7, 3);
  const Image back = denormalize(normalize(img, s), s);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(back.pixels[i], img.pixels[i], 1e-12);
}

TEST(Normalize, ZeroStdThrows) {
  ChannelStats s;
  s.std = {1.0, 0.0, 1.0};
  s.zero_std = {false, true, false};
  EXPECT_THROW(normalize(random_image(2, 2, 4), s), DataError);
}

// ---------------------------------------------------------------------------
// random erasing

TEST(Erase, ProbabilityZeroIsIdentity) {
  AugmentConfig c = all_off();
  const Image img = random_image(16, 8, 5);
  Rng rng(5);
  const EraseResult r = random_erase(img, c, rng);
  EXPECT_FALSE(r.rect.has_value());
  EXPECT_EQ(r.image, img);
}

TEST(Erase, AreaAndAspectWithinBoundsOverManyDraws) {
  AugmentConfig c;
  c.p_erase = 1.0;
  const Image img = random_image(64, 32, 6);
  Rng rng(6);
  std::size_t erased = 0;
  for (int i = 0; i < 1000; ++i) {
    const EraseResult r = random_erase(img, c, rng);
    if (!r.rect) continue;
    ++erased;
    const double frac = static_cast<double>(r.rect->height * r.rect->width) / (64.0 * 32.0);
    const double aspect = static_cast<double>(r.rect->height) / static_cast<double>(r.rect->width);
    ASSERT_GE(frac, c.erase_area_min);
    ASSERT_LE(frac, c.erase_area_max);
    ASSERT_GE(aspect, c.erase_aspect_min);
    ASSERT_LE(aspect, c.erase_aspect_max);
    ASSERT_LE(r.rect->top + r.rect->height, 64u);
    ASSERT_LE(r.rect->left + r.rect->width, 32u);
  }
  EXPECT_GT(erased, 950u);
}

TEST(Erase, PixelsOutsideTheRectangleAreUnchanged) {
  AugmentConfig c;
  c.p_erase = 1.0;
  const Image img = random_image(32, 16, 7);
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const EraseResult r = random_erase(img, c, rng);
    ASSERT_TRUE(r.rect);
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 16; ++x) {
          const bool inside = y >= r.rect->top && y < r.rect->top + r.rect->height && x >= r.rect->left &&
                              x < r.rect->left + r.rect->width;
          if (!inside) {
            ASSERT_EQ(r.image.at(ch, y, x), img.at(ch, y, x));
          }
        }
  }
}

TEST(Erase, MeanFillUsesTheStats) {
  AugmentConfig c;
  c.p_erase = 1.0;
  c.erase_fill = EraseFill::mean;
  c.stats.mean = {0.1, 0.2, 0.3};
  Rng rng(8);
  const EraseResult r = random_erase(random_image(32, 16, 8), c, rng);
  ASSERT_TRUE(r.rect);
  for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(r.image.at(ch, r.rect->top, r.rect->left), c.stats.mean[ch]);
}

TEST(Erase, InfeasibleRangesWarnAndLeaveTheImage) {
  AugmentConfig c;
  c.p_erase = 1.0;
  c.erase_area_min = 0.30;
  c.erase_area_max = 0.31;
  c.erase_aspect_min = 3.0;
  c.erase_aspect_max = 3.3;
  const Image img = random_image(2, 2, 9);  // no whole-pixel rectangle has area 30%
  Rng rng(9);
  const auto before = log::warning_count();
  const EraseResult r = random_erase(img, c, rng);
  EXPECT_FALSE(r.rect);
  EXPECT_EQ(r.image, img);
  EXPECT_GT(log::warning_count(), before);
}

// ---------------------------------------------------------------------------
// blur

TEST(Blur, SigmaZeroIsIdentity) {
  const Image img = random_image(6, 6, 10);
  EXPECT_EQ(gaussian_blur(img, 0.0), img);
}

TEST(Blur, KernelIsNormalizedAndConstantImagesSurvive) {
  for (double sigma : {0.1, 0.5, 1.0, 1.7, 2.0, 3.3}) {
    const auto k = gaussian_kernel(sigma);
    EXPECT_EQ(k.size(), 2 * static_cast<std::size_t>(std::ceil(3 * sigma)) + 1);
    double s = 0;
    for (double v : k) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
    const Image out = gaussian_blur(constant_image(9, 7, 0.3), sigma);
    for (double v : out.pixels) EXPECT_NEAR(v, 0.3, 1e-9);
  }
}

TEST(Blur, ImpulseResponseIsTheSampledGaussian) {
  const double sigma = 1.3;
  const std::size_t n = 21, cy = 10, cx = 10;
  Image img(3, n, n, 0.0);
  for (std::size_t c = 0; c < 3; ++c) img.at(c, cy, cx) = 1.0;
  const Image out = gaussian_blur(img, sigma);
  const int r = static_cast<int>(std::ceil(3 * sigma));
  double z = 0;
  for (int i = -r; i <= r; ++i) z += std::exp(-i * i / (2 * sigma * sigma));
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double expected = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / (z * z);
      EXPECT_NEAR(out.at(1, cy + dy, cx + dx), expected, 1e-6);
    }
  EXPECT_EQ(out.at(0, cy, cx + r + 1), 0.0);
}

TEST(Blur, NegativeSigmaThrows) {
  EXPECT_THROW(gaussian_blur(random_image(3, 3, 11), -0.5), ConfigError);
}

// ---------------------------------------------------------------------------
// geometric transforms

TEST(Warp, IdentityParametersLeaveTheImage) {
  const Image img = random_image(12, 8, 12);
  const Image a = warp(img, affine_matrix({}, 12, 8));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(a.pixels[i], img.pixels[i], 1e-12);
  const auto p = perspective_matrix({}, 12, 8);
  ASSERT_TRUE(p);
  const Image b = warp(img, *p);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(b.pixels[i], img.pixels[i], 1e-12);
}

TEST(Warp, QuarterTurnPermutesA2x2Pattern) {
  // [[a, b], [c, d]] rotated by +90 degrees (x right, y down) is [[c, a], [d, b]].
  Image img(3, 2, 2);
  const double a = 0.1, b = 0.2, c = 0.3, d = 0.4;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    img.at(ch, 0, 0) = a;
    img.at(ch, 0, 1) = b;
    img.at(ch, 1, 0) = c;
    img.at(ch, 1, 1) = d;
  }
  AffineParams p;
  p.rotation_deg = 90.0;
  const Image out = warp(img, affine_matrix(p, 2, 2));
  for (std::size_t ch = 0; ch < 3; ++ch) {
    EXPECT_NEAR(out.at(ch, 0, 0), c, 1e-12);
    EXPECT_NEAR(out.at(ch, 0, 1), a, 1e-12);
    EXPECT_NEAR(out.at(ch, 1, 0), d, 1e-12);
    EXPECT_NEAR(out.at(ch, 1, 1), b, 1e-12);
  }
}

TEST(Warp, PerspectiveMapsCornersToDisplacedCorners) {
  PerspectiveParams p;
  p.dx = {1.0, -0.5, 0.3, 0.2};
  p.dy = {0.4, 0.7, -1.0, -0.2};
  const auto m = perspective_matrix(p, 10, 6);
  ASSERT_TRUE(m);
  const double xs[4] = {0, 5, 5, 0}, ys[4] = {0, 0, 9, 9};
  for (int k = 0; k < 4; ++k) {
    const Mat3& h = *m;
    const double z = h[6] * xs[k] + h[7] * ys[k] + h[8];
    EXPECT_NEAR((h[0] * xs[k] + h[1] * ys[k] + h[2]) / z, xs[k] + p.dx[k], 1e-9);
    EXPECT_NEAR((h[3] * xs[k] + h[4] * ys[k] + h[5]) / z, ys[k] + p.dy[k], 1e-9);
  }
}

TEST(Warp, RoundTripInteriorErrorIsSmall) {
  // Smooth test image so bilinear resampling error stays small.
  Image img(3, 32, 16);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 16; ++x)
        img.at(c, y, x) = 0.5 + 0.4 * std::sin(0.3 * x + 0.2 * y + static_cast<double>(c));
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    AffineParams ap;
    ap.rotation_deg = rng.uniform(-10, 10);
    ap.scale = rng.uniform(0.9, 1.1);
    ap.translate_x = rng.uniform(-1.6, 1.6);
    ap.translate_y = rng.uniform(-3.2, 3.2);
    PerspectiveParams pp;
    for (std::size_t k = 0; k < 4; ++k) {
      pp.dx[k] = rng.uniform(-1.6, 1.6);
      pp.dy[k] = rng.uniform(-3.2, 3.2);
    }
    for (const Mat3& T : {affine_matrix(ap, 32, 16), *perspective_matrix(pp, 32, 16)}) {
      const Image back = warp(warp(img, T), *mat3_inverse(T));
      double err = 0;
      std::size_t n = 0;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 8; y < 24; ++y)
          for (std::size_t x = 4; x < 12; ++x, ++n) err += std::abs(back.at(c, y, x) - img.at(c, y, x));
      EXPECT_LT(err / static_cast<double>(n), 0.02);
    }
  }
}

TEST(Warp, OutOfSourcePixelsTakeTheChannelMean) {
  Image img = random_image(8, 8, 14);
  AffineParams p;
  p.translate_x = 100.0;
  const Image out = warp(img, affine_matrix(p, 8, 8));
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0;
    for (std::size_t i = 0; i < 64; ++i) m += img.pixels[c * 64 + i];
    m /= 64;
    EXPECT_NEAR(out.at(c, 3, 3), m, 1e-12);
  }
}

TEST(Warp, SingularTransformIsRejected) {
  AffineParams p;
  p.scale = 0.0;
  EXPECT_THROW(warp(random_image(4, 4, 15), affine_matrix(p, 4, 4)), ConfigError);
  EXPECT_FALSE(mat3_inverse(affine_matrix(p, 4, 4)).has_value());
}

TEST(Warp, GeometricTransformStaysInRange) {
  AugmentConfig c;
  const Image img = random_image(16, 8, 16);
  Rng rng(16);
  for (int i = 0; i < 100; ++i)
    for (WarpKind kind : {WarpKind::affine, WarpKind::perspective}) {
      const Image out = geometric_transform(img, kind, c, rng);
      for (double v : out.pixels) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
}

// ---------------------------------------------------------------------------
// color

TEST(Color, UnitFactorsAreIdentity) {
  const Image img = random_image(5, 5, 17);
  EXPECT_EQ(color_adjust(img, ColorParams{}), img);
}

TEST(Color, ZeroSaturationGivesLumaGray) {
  const Image img = random_image(4, 4, 18);
  ColorParams p;
  p.saturation = 0.0;
  const Image out = color_adjust(img, p);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      const double luma = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.at(c, y, x), luma, 1e-15);
    }
}

TEST(Color, BrightnessScalesLinearly) {
  const Image img = random_image(4, 4, 19);
  ColorParams p;
  p.brightness = 0.5;
  const Image out = color_adjust(img, p);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_EQ(out.pixels[i], img.pixels[i] * 0.5);
}

TEST(Color, ContrastBlendsTowardMeanLuma) {
  const Image img = random_image(4, 4, 20);
  ColorParams p;
  p.contrast = 0.0;
  const Image out = color_adjust(img, p);
  double m = 0;
  for (std::size_t i = 0; i < 16; ++i)
    m += 0.299 * img.pixels[i] + 0.587 * img.pixels[16 + i] + 0.114 * img.pixels[32 + i];
  m /= 16;
  for (double v : out.pixels) EXPECT_NEAR(v, m, 1e-15);
}

TEST(Color, OutputIsClamped) {
  ColorParams p;
  p.brightness = 3.0;
  for (double v : color_adjust(random_image(4, 4, 21), p).pixels) EXPECT_LE(v, 1.0);
}

// ---------------------------------------------------------------------------
// pipeline

TEST(Pipeline, AllProbabilitiesZeroOnlyNormalizes) {
  AugmentConfig c = all_off();
  c.stats.mean = {0.4, 0.5, 0.6};
  c.stats.std = {0.2, 0.25, 0.3};
  const Image img = random_image(16, 8, 22);
  Rng rng(22);
  EXPECT_EQ(apply_pipeline(img, c, rng), normalize(img, c.stats));
}

TEST(Pipeline, SameSeedSameOutput) {
  AugmentConfig c;
  const Image img = random_image(16, 8, 23);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    EXPECT_EQ(apply_pipeline(img, c, a), apply_pipeline(img, c, b));
  }
}

TEST(Pipeline, FiniteAndWithinTheNormalizedRange) {
  AugmentConfig c;
  c.stats.mean = {0.45, 0.43, 0.4};
  c.stats.std = {0.25, 0.24, 0.26};
  const Image img = random_image(16, 8, 24);
  Rng rng(24);
  for (int i = 0; i < 1000; ++i) {
    const Image out = apply_pipeline(img, c, rng);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double lo = (0.0 - c.stats.mean[ch]) / c.stats.std[ch] - 1e-12;
      const double hi = (1.0 - c.stats.mean[ch]) / c.stats.std[ch] + 1e-12;
      for (std::size_t k = 0; k < out.plane(); ++k) {
        const double v = out.pixels[ch * out.plane() + k];
        ASSERT_TRUE(std::isfinite(v));
        ASSERT_GE(v, lo);
        ASSERT_LE(v, hi);
      }
    }
  }
}

TEST(Pipeline, DisabledConfigOnlyNormalizes) {
  AugmentConfig c;
  c.enabled = false;
  const Image img = random_image(8, 8, 25);
  Rng rng(25), untouched(25);
  EXPECT_EQ(apply_pipeline(img, c, rng), normalize(img, c.stats));
  EXPECT_EQ(rng.next_u64(), untouched.next_u64());
}

TEST(AugmentConfig, Validation) {
  AugmentConfig c;
  c.p_blur = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.erase_area_min = 0.5;
  c.erase_area_max = 0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.blur_sigma_min = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}
