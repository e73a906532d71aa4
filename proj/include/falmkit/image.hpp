#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "falmkit/colorimetry.hpp"

namespace falmkit {

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

inline Srgb to_srgb(Rgb8 p) { return {double(p.r), double(p.g), double(p.b)}; }

/// Row-major 8-bit RGB raster.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb8 fill = {});

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] bool empty() const noexcept { return pixels_.empty(); }

  [[nodiscard]] Rgb8 at(int x, int y) const { return pixels_[index(x, y)]; }
  Rgb8& at(int x, int y) { return pixels_[index(x, y)]; }

  void fill_rect(int x, int y, int w, int h, Rgb8 colour);

  [[nodiscard]] const std::vector<Rgb8>& pixels() const noexcept { return pixels_; }

 private:
  [[nodiscard]] std::size_t index(int x, int y) const;

  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb8> pixels_;
};

/// Decodes PNG (any bit depth/colour type, via libpng) or uncompressed 8/24/32-bit BMP.
/// Throws Error(kSchema) on unreadable or unsupported files.
Image read_image(const std::filesystem::path& path);

/// 24-bit bottom-up BMP; output bytes depend only on the pixel data.
void write_bmp(const std::filesystem::path& path, const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace falmkit
