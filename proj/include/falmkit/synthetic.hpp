#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "falmkit/falm.hpp"
#include "falmkit/image.hpp"
#include "falmkit/rng.hpp"
#include "falmkit/study_data.hpp"

namespace falmkit {

struct GroupSpec {
  std::string label;
  double proportion = 0.5;
  double mean_lightness = 50.0;
  std::array<double, 6> fst_weights{};  // response distribution over I..VI
};

/// Population and acquisition model for desk-scale studies. Lightness values are CIELAB L*.
///
/// A camera image of subject s on device d records
///   truth_s + scale * (bias_s + pair_sd + device_d + visit_v + e)
/// where bias_s is a per-subject exposure bias shared with the image background, pair_sd a
/// subject-by-device exposure term, device_d a per-device offset, visit_v a per-historic-visit drift and e per-image noise. Enrollment
/// images add a per-image exposure that also shifts the grey background.
struct PopulationSpec {
  std::size_t n_subjects = 345;
  std::vector<GroupSpec> groups = {
      {"B", 181.0 / 345.0, 45.5, {0.01, 0.02, 0.06, 0.14, 0.30, 0.47}},
      {"W", 164.0 / 345.0, 58.5, {0.07, 0.22, 0.36, 0.22, 0.10, 0.03}},
  };
  double within_group_sd = 5.0;
  double female_fraction = 0.5;
  double age_mean = 38.0;
  double age_sd = 12.0;
  double age_min = 18.0;
  double age_max = 80.0;
  double fst_lightness_weight = 0.5;
  double colormeter_sd = 0.8;

  std::size_t n_devices = 12;
  std::size_t acquisition_devices = 8;
  std::size_t historic_visits = 3;
  std::size_t historic_images_per_visit = 3;

  double subject_bias_sd = 22.0;
  double subject_device_sd = 0.0;
  double device_sd = 11.0;
  double time_sd = 3.0;
  double image_sd = 4.0;
  double noise_scale = 1.0;

  double enrollment_exposure_sd = 5.0;
  double enrollment_noise_sd = 2.0;
  double background_noise_sd = 0.5;
  double background_lightness = 50.0;

  std::size_t meds_subjects = 60;
  std::size_t meds_images_per_subject = 3;
  double meds_offset = -8.0;

  int image_size = 48;
  double pixel_noise = 1.5;  // per-channel jitter in 8-bit levels
  double specular_fraction = 0.03;
  std::string study_date = "2019-05-06";

  void validate() const;
};

/// A generated study plus the lightness each image was rendered to show.
struct SyntheticStudy {
  StudyBundle bundle;
  std::vector<double> true_lightness;        // per subject, bundle order
  std::vector<double> intended_face;         // per image, bundle order
  std::vector<double> intended_background;   // per image
};

/// Deterministic in (spec, seed). Throws kConfig on an invalid spec.
SyntheticStudy generate_synthetic_study(const PopulationSpec& spec, std::uint64_t seed);

/// Renders image `index` of the study. Output depends only on (spec, seed, index).
Image render_study_image(const SyntheticStudy& study, std::size_t index, const PopulationSpec& spec,
                         std::uint64_t seed);

/// sRGB colour of skin at lightness L (chroma reduced until it fits the gamut).
Srgb skin_colour(double lightness);

/// A square test image: neutral grey background and a skin-coloured disk filling 90% of the
/// face box, with per-channel dither and a sprinkling of specular white pixels.
struct PatchSpec {
  int size = 48;
  FaceBox face;
  double face_lightness = 50.0;
  double background_lightness = 50.0;
  double pixel_noise = 1.5;
  double specular_fraction = 0.0;
};
Image render_patch(const PatchSpec& patch, Rng& rng);

/// Measurements taken directly from the intended values, skipping rendering.
std::vector<ImageMeasurement> intended_measurements(const SyntheticStudy& study);

/// Renders every image in memory and measures it with the face-region pipeline.
std::vector<ImageMeasurement> rendered_measurements(const SyntheticStudy& study, const PopulationSpec& spec,
                                                    std::uint64_t seed, const MaskParams& mask = {},
                                                    unsigned jobs = 1);

}  // namespace falmkit
