#include "shvit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "shvit/augment.hpp"
#include "shvit/dataset.hpp"
#include "shvit/error.hpp"
#include "shvit/ppm.hpp"
#include "shvit/rng.hpp"

namespace shvit {

void SynthConfig::validate() const {
  if (num_ids == 0 || per_id == 0 || cameras == 0 || height == 0 || width == 0)
    throw ConfigError("synth: counts and image size must be positive");
  if (test_ids > 0 && test_per_id < 2) throw ConfigError("synth: test_per_id must be >= 2");
  if (heldout_same_ids && test_ids > num_ids)
    throw ConfigError("synth: heldout_same_ids needs test_ids <= num_ids");
  if (occlusion_prob < 0.0 || occlusion_prob > 1.0) throw ConfigError("synth: occlusion_prob must be in [0, 1]");
}

namespace {

struct Appearance {
  std::array<double, 3> upper, lower;
  int orientation;  // 0 horizontal, 1 vertical, 2 diagonal stripes
  double frequency;
  double amplitude;
  double split;  // waist position, fraction of height
};

Appearance appearance(std::uint64_t seed, int identity) {
  Rng rng(derive_seed(seed, {0x1d, static_cast<std::uint64_t>(identity)}));
  Appearance a{};
  for (auto& v : a.upper) v = rng.uniform(0.1, 0.9);
  for (auto& v : a.lower) v = rng.uniform(0.1, 0.9);
  a.orientation = static_cast<int>(rng.uniform_index(3));
  a.frequency = rng.uniform(0.5, 2.0);
  a.amplitude = rng.uniform(0.08, 0.2);
  a.split = rng.uniform(0.4, 0.6);
  return a;
}

struct CameraStyle {
  std::array<double, 3> tint;
  double blur;
};

CameraStyle camera_style(std::uint64_t seed, int camera) {
  Rng rng(derive_seed(seed, {0xca, static_cast<std::uint64_t>(camera)}));
  CameraStyle s{};
  for (auto& v : s.tint) v = rng.uniform(0.85, 1.15);
  s.blur = rng.uniform(0.0, 0.8);
  return s;
}

}  // namespace

Image render_synthetic(const SynthConfig& cfg, int identity, int camera, std::size_t image_index) {
  const Appearance a = appearance(cfg.seed, identity);
  const CameraStyle cam = camera_style(cfg.seed, camera);
  Rng rng(derive_seed(cfg.seed, {0x1a, static_cast<std::uint64_t>(identity), static_cast<std::uint64_t>(camera),
                                 image_index}));
  const std::size_t H = cfg.height, W = cfg.width;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double shift = rng.uniform(-0.08, 0.08) * static_cast<double>(H);
  const double gain = rng.uniform(0.9, 1.1);

  Image img(3, H, W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double fy = (static_cast<double>(y) + shift) / static_cast<double>(H);
      const double fx = static_cast<double>(x) / static_cast<double>(W);
      const auto& base = fy < a.split ? a.upper : a.lower;
      double u = 0.0;
      switch (a.orientation) {
        case 0: u = fy; break;
        case 1: u = fx; break;
        default: u = 0.5 * (fx + fy); break;
      }
      const double stripe = a.amplitude * std::sin(2.0 * std::numbers::pi * a.frequency * 4.0 * u + phase);
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = (base[c] + stripe) * gain * cam.tint[c];
    }
  img = gaussian_blur(img, cam.blur);
  if (rng.bernoulli(cfg.occlusion_prob)) {
    const std::size_t oh = std::max<std::size_t>(1, H / 4), ow = std::max<std::size_t>(1, W / 2);
    const std::size_t top = rng.uniform_index(H - oh + 1), left = rng.uniform_index(W - ow + 1);
    const double gray = rng.uniform(0.2, 0.8);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = top; y < top + oh; ++y)
        for (std::size_t x = left; x < left + ow; ++x) img.at(c, y, x) = gray;
  }
  for (double& v : img.pixels) v = std::clamp(v + 0.03 * rng.normal(), 0.0, 1.0);
  return img;
}

std::string synthetic_filename(int identity, int camera, std::size_t image_index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d_c%ds1_%06zu_00.ppm", identity, camera, image_index);
  return buf;
}

SynthSummary generate_synthetic_dataset(const std::string& root, const SynthConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  SynthSummary sum;
  auto dir = [&](SplitName s) {
    const fs::path p = fs::path(root) / split_directory(s);
    fs::create_directories(p);
    return p;
  };
  auto emit = [&](const fs::path& d, int id, std::size_t k) {
    const int cam = static_cast<int>(k % cfg.cameras) + 1;
    write_ppm(render_synthetic(cfg, id, cam, k), (d / synthetic_filename(id, cam, k)).string());
  };

  const fs::path train = dir(SplitName::train);
  for (std::size_t i = 1; i <= cfg.num_ids; ++i)
    for (std::size_t k = 0; k < cfg.per_id; ++k, ++sum.train) emit(train, static_cast<int>(i), k);

  if (cfg.val_per_id > 0) {
    const fs::path val = dir(SplitName::val);
    for (std::size_t i = 1; i <= cfg.num_ids; ++i)
      for (std::size_t k = cfg.per_id; k < cfg.per_id + cfg.val_per_id; ++k, ++sum.val) emit(val, static_cast<int>(i), k);
  }

  if (cfg.test_ids > 0) {
    const fs::path query = dir(SplitName::query), gallery = dir(SplitName::gallery);
    // Held-out images of seen identities start after every train/val index.
    const std::size_t first = cfg.heldout_same_ids ? cfg.per_id + cfg.val_per_id : 0;
    for (std::size_t t = 1; t <= cfg.test_ids; ++t) {
      const int id = static_cast<int>(cfg.heldout_same_ids ? t : cfg.num_ids + t);
      for (std::size_t j = 0; j < cfg.test_per_id; ++j) {
        // Camera follows j so that the query (j = 0) always sits on camera 1.
        const std::size_t k = first + j;
        const int cam = static_cast<int>(j % cfg.cameras) + 1;
        const fs::path& d = j == 0 ? query : gallery;
        write_ppm(render_synthetic(cfg, id, cam, k), (d / synthetic_filename(id, cam, k)).string());
        ++(j == 0 ? sum.query : sum.gallery);
      }
    }
  }
  return sum;
}

}  // namespace shvit
