#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falmkit/study_data.hpp"

namespace falmkit {

/// Per-device mean face (and background) lightness over the images of one dataset.
struct DeviceStats {
  std::string device_id;
  double mu_face = 0.0;        // mu_{f,d}
  double mu_background = 0.0;  // mu_{b,d}; only meaningful for background-corrected data
  std::size_t n_images = 0;
};

struct GlobalStats {
  double mu_face = 0.0;  // grand mean over images
};

/// L_{f,d} - mu_{f,d} + mu_f
double device_normalize(double face_lightness, const DeviceStats& device, const GlobalStats& global);

/// (L_{f,d} - L_{b,d}) + (mu_{f,d} - mu_{b,d}) / 2
double background_correct(double face_lightness, double background_lightness, const DeviceStats& device);

/// Mean of the two bilateral cheek readings.
double colormeter_falm(const ColormeterReading& reading);

/// One measured image as written by the measure command.
struct ImageMeasurement {
  std::string image_id;
  std::string subject_id;
  std::string device_id;
  std::string capture_date;
  std::string environment_tag;
  ImageSource source = ImageSource::kAcquisition;
  double face_lightness = 0.0;
  std::optional<double> background_lightness;
  std::size_t line = 0;
};

struct FalmRow {
  std::string subject_id;
  std::string image_id;   // empty for subject-level datasets
  std::string device_id;  // empty when not applicable
  double lightness = 0.0;
};

struct FalmTable {
  std::string dataset_id;
  std::vector<FalmRow> rows;
  std::vector<DeviceStats> devices;  // filled for device/background corrected datasets
  std::optional<GlobalStats> global;

  /// One value per subject: the mean of that subject's rows, keyed and ordered by subject id.
  [[nodiscard]] std::map<std::string, double> subject_means() const;
  /// Every row value grouped by subject id.
  [[nodiscard]] std::map<std::string, std::vector<double>> values_by_subject() const;
};

/// Applies the dataset's formula. Statistics are computed over the images the dataset includes.
/// Throws SchemaError naming the field and row when required metadata is missing.
FalmTable build_falm_table(const DatasetSpec& spec, std::span<const ImageMeasurement> measurements,
                           std::span<const SubjectRecord> subjects);

/// Device statistics over a set of measurements, ordered by device id.
std::vector<DeviceStats> compute_device_stats(std::span<const ImageMeasurement> measurements);

void write_falm_csv(std::ostream& out, const FalmTable& table);
void write_falm_rows(std::ostream& out, const FalmTable& table);  // rows only, no header
FalmTable read_falm_csv(const std::filesystem::path& path);

void write_measurements_csv(std::ostream& out, std::span<const ImageMeasurement> rows);
std::vector<ImageMeasurement> read_measurements_csv(const std::filesystem::path& path);

}  // namespace falmkit
