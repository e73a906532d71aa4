#pragma once

#include <limits>
#include <vector>

#include "falmkit/colorimetry.hpp"
#include "falmkit/image.hpp"

namespace falmkit {

/// Axis-aligned face bounding box as produced by an external detector.
struct FaceBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Rectangle of neutral background, disjoint from the face box.
struct BackgroundRegion {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct MaskParams {
  /// Mask radius as a fraction of min(width, height), centred on the box. Range (0, 0.5].
  double radius_fraction = 0.4;
  /// Pixels further than outlier_k scaled MADs from the median in any Lab channel are dropped.
  /// Infinity disables rejection.
  double outlier_k = 3.0;

  void validate() const;
};

/// Consistency constant that makes the MAD a normal-sigma estimate.
inline constexpr double kMadScale = 1.4826;
inline constexpr std::size_t kMinMaskPixels = 25;

struct FaceExtraction {
  std::vector<Srgb> pixels;  // surviving skin pixels
  std::size_t masked = 0;    // pixels inside the circular mask
  std::size_t rejected = 0;  // removed by the outlier rule
};

/// Circular mask followed by median/MAD outlier rejection in Lab.
/// Errors: box outside image or degenerate params (kInputDomain); fewer than
/// kMinMaskPixels in the mask (kEmptyInput); every pixel rejected (kDegenerate).
FaceExtraction extract_face(const Image& image, const FaceBox& box, const MaskParams& params = {});

/// The outlier rule on its own: drops pixels more than outlier_k scaled MADs from the
/// per-channel Lab median. Infinity keeps everything.
FaceExtraction reject_outliers(std::vector<Srgb> candidates, double outlier_k);

std::vector<Srgb> extract_face_pixels(const Image& image, const FaceBox& box,
                                      const MaskParams& params = {});

/// Face-area lightness: L* of the mean sRGB of the surviving face pixels.
double image_falm(const Image& image, const FaceBox& box, const MaskParams& params = {});

/// L* of the mean sRGB of a background rectangle (no outlier rejection). When a face box
/// is supplied, an overlapping region is rejected with kInputDomain.
double background_lightness(const Image& image, const BackgroundRegion& region,
                            const FaceBox* face = nullptr);

bool overlaps(const FaceBox& face, const BackgroundRegion& region);

/// Median of a copy of the values (average of the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace falmkit
