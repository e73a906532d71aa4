#include "falmkit/face_region.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "falmkit/error.hpp"

namespace falmkit {

void MaskParams::validate() const {
  if (!(radius_fraction > 0.0 && radius_fraction <= 0.5)) {
    throw Error(ErrorKind::kInputDomain, "radius_fraction must be in (0, 0.5]");
  }
  if (!(outlier_k > 0.0)) throw Error(ErrorKind::kInputDomain, "outlier_k must be > 0");
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::kEmptyInput, "median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

bool overlaps(const FaceBox& face, const BackgroundRegion& region) {
  return region.x < face.x + face.width && face.x < region.x + region.width &&
         region.y < face.y + face.height && face.y < region.y + region.height;
}

FaceExtraction extract_face(const Image& image, const FaceBox& box, const MaskParams& params) {
  params.validate();
  if (box.width <= 0 || box.height <= 0) {
    throw Error(ErrorKind::kInputDomain, "face box must have positive width and height");
  }
  if (box.x < 0 || box.y < 0 || box.x + box.width > image.width() ||
      box.y + box.height > image.height()) {
    throw Error(ErrorKind::kInputDomain, "face box extends outside the image");
  }

  const double cx = box.x + 0.5 * box.width;
  const double cy = box.y + 0.5 * box.height;
  const double radius = params.radius_fraction * std::min(box.width, box.height);
  const double r2 = radius * radius;

  std::vector<Srgb> candidates;
  for (int y = box.y; y < box.y + box.height; ++y) {
    for (int x = box.x; x < box.x + box.width; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r2) candidates.push_back(to_srgb(image.at(x, y)));
    }
  }
  if (candidates.size() < kMinMaskPixels) {
    throw Error(ErrorKind::kEmptyInput, "face mask holds " + std::to_string(candidates.size()) +
                                            " pixels, need at least " + std::to_string(kMinMaskPixels));
  }

  return reject_outliers(std::move(candidates), params.outlier_k);
}

FaceExtraction reject_outliers(std::vector<Srgb> candidates, double outlier_k) {
  if (candidates.empty()) throw Error(ErrorKind::kEmptyInput, "no pixels to filter");
  if (!(outlier_k > 0.0)) throw Error(ErrorKind::kInputDomain, "outlier_k must be > 0");
  FaceExtraction out;
  out.masked = candidates.size();
  if (std::isinf(outlier_k)) {
    out.pixels = std::move(candidates);
    return out;
  }

  std::vector<LabColor> lab;
  lab.reserve(candidates.size());
  for (const auto& p : candidates) lab.push_back(srgb_to_lab(p));

  std::array<double, 3> centre{};
  std::array<double, 3> limit{};
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> v;
    v.reserve(lab.size());
    for (const auto& c : lab) v.push_back(ch == 0 ? c.L : ch == 1 ? c.a : c.b);
    centre[ch] = median(v);
    for (auto& x : v) x = std::abs(x - centre[ch]);
    limit[ch] = outlier_k * kMadScale * median(std::move(v));
  }

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const LabColor& c = lab[i];
    const bool keep = std::abs(c.L - centre[0]) <= limit[0] && std::abs(c.a - centre[1]) <= limit[1] &&
                      std::abs(c.b - centre[2]) <= limit[2];
    if (keep) {
      out.pixels.push_back(candidates[i]);
    } else {
      ++out.rejected;
    }
  }
  if (out.pixels.empty()) throw Error(ErrorKind::kDegenerate, "outlier rejection removed every face pixel");
  return out;
}

std::vector<Srgb> extract_face_pixels(const Image& image, const FaceBox& box, const MaskParams& params) {
  return extract_face(image, box, params).pixels;
}

double image_falm(const Image& image, const FaceBox& box, const MaskParams& params) {
  return srgb_to_lab(mean_srgb(extract_face_pixels(image, box, params))).L;
}

double background_lightness(const Image& image, const BackgroundRegion& region, const FaceBox* face) {
  if (region.width <= 0 || region.height <= 0) {
    throw Error(ErrorKind::kEmptyInput, "background region is empty");
  }
  if (region.x < 0 || region.y < 0 || region.x + region.width > image.width() ||
      region.y + region.height > image.height()) {
    throw Error(ErrorKind::kInputDomain, "background region extends outside the image");
  }
  if (face != nullptr && overlaps(*face, region)) {
    throw Error(ErrorKind::kInputDomain, "background region overlaps the face box");
  }
  std::vector<Srgb> pixels;
  pixels.reserve(static_cast<std::size_t>(region.width) * static_cast<std::size_t>(region.height));
  for (int y = region.y; y < region.y + region.height; ++y) {
    for (int x = region.x; x < region.x + region.width; ++x) pixels.push_back(to_srgb(image.at(x, y)));
  }
  return srgb_to_lab(mean_srgb(pixels)).L;
}

}  // namespace falmkit
