#pragma once

#include <cstddef>
#include <vector>

#include "shvit/tensor.hpp"

namespace shvit {

/// Planar RGB image, channel-major (c, y, x). Values are in [0, 1] before
/// normalization.
struct Image {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  std::size_t plane() const { return height * width; }

  bool operator==(const Image&) const = default;
};

/// [C x H x W] tensor view of an image (copies).
Tensor to_tensor(const Image& img);

}  // namespace shvit
