#include <png.h>

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

#include "falmkit/error.hpp"
#include "falmkit/image.hpp"

namespace falmkit {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& msg) {
  throw Error(ErrorKind::kSchema, path.string() + ": " + msg);
}

Image decode_bmp(const std::filesystem::path& path, const std::vector<unsigned char>& data) {
  if (data.size() < 54) fail(path, "truncated BMP header");
  const std::uint32_t pixel_offset = le32(&data[10]);
  const std::uint32_t header_size = le32(&data[14]);
  if (header_size < 40) fail(path, "unsupported BMP header (need BITMAPINFOHEADER or later)");
  const auto width = static_cast<std::int32_t>(le32(&data[18]));
  const auto raw_height = static_cast<std::int32_t>(le32(&data[22]));
  const std::uint16_t bpp = le16(&data[28]);
  const std::uint32_t compression = le32(&data[30]);
  if (compression != 0) fail(path, "compressed BMP not supported");
  if (bpp != 8 && bpp != 24 && bpp != 32) fail(path, "unsupported BMP bit depth " + std::to_string(bpp));
  if (width <= 0 || raw_height == 0) fail(path, "invalid BMP dimensions");
  const bool top_down = raw_height < 0;
  const int height = top_down ? -raw_height : raw_height;

  std::vector<Rgb8> palette;
  if (bpp == 8) {
    std::uint32_t colours = le32(&data[46]);
    if (colours == 0) colours = 256;
    const std::size_t pal_start = 14 + header_size;
    if (pal_start + 4 * std::size_t(colours) > data.size()) fail(path, "truncated BMP palette");
    for (std::uint32_t i = 0; i < colours; ++i) {
      const unsigned char* q = &data[pal_start + 4 * i];
      palette.push_back({q[2], q[1], q[0]});
    }
  }

  const std::size_t row_bytes = ((std::size_t(width) * bpp + 31) / 32) * 4;
  if (pixel_offset + row_bytes * std::size_t(height) > data.size()) fail(path, "truncated BMP pixel data");

  Image img(width, height);
  for (int row = 0; row < height; ++row) {
    const int y = top_down ? row : height - 1 - row;
    const unsigned char* src = &data[pixel_offset + row_bytes * std::size_t(row)];
    for (int x = 0; x < width; ++x) {
      if (bpp == 8) {
        const unsigned idx = src[x];
        if (idx >= palette.size()) fail(path, "BMP palette index out of range");
        img.at(x, y) = palette[idx];
      } else {
        const unsigned char* px = src + std::size_t(x) * (bpp / 8);
        img.at(x, y) = {px[2], px[1], px[0]};
      }
    }
  }
  return img;
}

Image decode_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    fail(path, std::string("PNG decode failed: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    fail(path, std::string("PNG decode failed: ") + png.message);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const unsigned char* px = &buffer[(std::size_t(y) * png.width + std::size_t(x)) * 3];
      img.at(x, y) = {px[0], px[1], px[2]};
    }
  }
  return img;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open image");
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  static constexpr std::array<unsigned char, 8> kPngSig = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (data.size() >= 8 && std::equal(kPngSig.begin(), kPngSig.end(), data.begin())) {
    return decode_png(path);
  }
  if (data.size() >= 2 && data[0] == 'B' && data[1] == 'M') return decode_bmp(path, data);
  fail(path, "unrecognised image format (expected PNG or BMP)");
}

void write_bmp(const std::filesystem::path& path, const Image& image) {
  const std::size_t row_bytes = ((std::size_t(image.width()) * 24 + 31) / 32) * 4;
  const std::size_t pixel_bytes = row_bytes * std::size_t(image.height());
  std::vector<unsigned char> out;
  out.reserve(54 + pixel_bytes);
  out.push_back('B');
  out.push_back('M');
  put32(out, static_cast<std::uint32_t>(54 + pixel_bytes));
  put32(out, 0);
  put32(out, 54);
  put32(out, 40);
  put32(out, static_cast<std::uint32_t>(image.width()));
  put32(out, static_cast<std::uint32_t>(image.height()));
  put16(out, 1);
  put16(out, 24);
  put32(out, 0);
  put32(out, static_cast<std::uint32_t>(pixel_bytes));
  put32(out, 2835);  // 72 dpi
  put32(out, 2835);
  put32(out, 0);
  put32(out, 0);
  for (int row = image.height() - 1; row >= 0; --row) {
    std::size_t written = 0;
    for (int x = 0; x < image.width(); ++x) {
      const Rgb8 p = image.at(x, row);
      out.push_back(p.b);
      out.push_back(p.g);
      out.push_back(p.r);
      written += 3;
    }
    for (; written < row_bytes; ++written) out.push_back(0);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kConfig, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

void write_png(const std::filesystem::path& path, const Image& image) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer;
  buffer.reserve(image.pixels().size() * 3);
  for (const auto& p : image.pixels()) {
    buffer.push_back(p.r);
    buffer.push_back(p.g);
    buffer.push_back(p.b);
  }
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw Error(ErrorKind::kConfig, "PNG encode failed: " + std::string(png.message));
  }
}

}  // namespace falmkit
