#include "shvit/ppm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "shvit/error.hpp"
#include "shvit/fileio.hpp"

namespace shvit {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : b_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      const char c = b_[pos_];
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= b_.size() || !std::isdigit(static_cast<unsigned char>(b_[pos_])))
      throw DataError(std::string("PPM: missing or malformed ") + what);
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (v > (1u << 24)) throw DataError(std::string("PPM: ") + what + " too large");
      ++pos_;
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_ppm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw DataError("PPM: bad magic (expected P6)");
  HeaderReader r(bytes);
  r.advance(2);
  const std::size_t w = r.number("width");
  const std::size_t h = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (w == 0 || h == 0) throw DataError("PPM: zero image dimension");
  if (maxval != 255) throw DataError("PPM: maxval " + std::to_string(maxval) + " unsupported (need 255)");
  // Exactly one whitespace byte separates the header from the raster.
  if (r.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[r.pos()])))
    throw DataError("PPM: truncated header");
  r.advance(1);
  const std::size_t need = w * h * 3;
  if (bytes.size() - r.pos() < need)
    throw DataError("PPM: truncated payload (" + std::to_string(bytes.size() - r.pos()) + " of " +
                    std::to_string(need) + " bytes)");
  Image img(3, h, w);
  const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + r.pos());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = px[(y * w + x) * 3 + c] / 255.0;
  return img;
}

Image decode_image(const std::string& path) {
  try {
    return decode_ppm(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string encode_ppm(const Image& img) {
  if (img.channels != 3) throw DataError("PPM: can only encode RGB images");
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + img.width * img.height * 3);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        out[header + (y * img.width + x) * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
  return out;
}

void write_ppm(const Image& img, const std::string& path) { write_file_atomic(path, encode_ppm(img)); }

}  // namespace shvit
