#pragma once

#include <string>
#include <string_view>

#include "shvit/image.hpp"

namespace shvit {

/// Binary 8-bit PPM (P6). Header tokens may be separated by any whitespace
/// and '#' comments; maxval must be 255. Samples map to [0, 1] as v / 255.
Image decode_ppm(std::string_view bytes);
Image decode_image(const std::string& path);

/// Canonical P6: "P6\n<w> <h>\n255\n" then RGB bytes, each sample
/// round(clamp(v, 0, 1) * 255).
std::string encode_ppm(const Image& img);
void write_ppm(const Image& img, const std::string& path);

}  // namespace shvit
