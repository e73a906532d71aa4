#include "falmkit/image.hpp"

#include <algorithm>
#include <string>

#include "falmkit/error.hpp"

namespace falmkit {

Image::Image(int width, int height, Rgb8 fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::kInputDomain, "image dimensions must be positive");
  }
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

std::size_t Image::index(int x, int y) const {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) {
    throw Error(ErrorKind::kInputDomain,
                "pixel (" + std::to_string(x) + "," + std::to_string(y) + ") outside image");
  }
  return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
}

void Image::fill_rect(int x, int y, int w, int h, Rgb8 colour) {
  const int x0 = std::max(0, x);
  const int y0 = std::max(0, y);
  const int x1 = std::min(width_, x + w);
  const int y1 = std::min(height_, y + h);
  for (int yy = y0; yy < y1; ++yy) {
    for (int xx = x0; xx < x1; ++xx) pixels_[index(xx, yy)] = colour;
  }
}

}  // namespace falmkit
