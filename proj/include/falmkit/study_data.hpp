#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "falmkit/csv.hpp"
#include "falmkit/error.hpp"
#include "falmkit/face_region.hpp"

namespace falmkit {

/// Fitzpatrick skin type, stored as its ordinal 1..6.
enum class Fst : int { I = 1, II, III, IV, V, VI };

inline int ordinal(Fst f) { return static_cast<int>(f); }
std::string_view roman(Fst f);
std::optional<Fst> fst_from_ordinal(int value);

/// Survey option strings in category order I..VI.
const std::vector<std::string>& fst_option_texts();

/// Maps a survey response onto its category. Matching ignores case and collapses
/// whitespace; anything else raises ErrorKind::kSurveyMapping.
Fst parse_fst_response(std::string_view text);

struct ColormeterReading {
  double right_cheek = 0.0;  // L_rc
  double left_cheek = 0.0;   // L_lc
};

struct SubjectRecord {
  std::string subject_id;
  std::string race;
  std::string gender;
  double age = 0.0;
  std::optional<Fst> fst;
  std::optional<ColormeterReading> colormeter;
};

enum class ImageSource { kMeds, kHistoric, kAcquisition, kEnrollment };

std::string_view to_string(ImageSource s);
std::optional<ImageSource> image_source_from_string(std::string_view s);

/// Calendar date kept as text plus a day number for ordering/comparisons.
struct CaptureDate {
  std::string iso;  // YYYY-MM-DD
  long days = 0;    // days since 1970-01-01

  static std::optional<CaptureDate> parse(std::string_view text);
  friend bool operator==(const CaptureDate& a, const CaptureDate& b) { return a.days == b.days; }
};

struct ImageRecord {
  std::string image_id;
  std::string subject_id;
  std::string device_id;
  CaptureDate capture_date;
  std::string environment_tag;
  ImageSource source = ImageSource::kAcquisition;
  FaceBox face_box;
  std::optional<BackgroundRegion> background;
  std::string path;
  std::size_t line = 0;  // line in images.csv, 0 when generated in memory
};

enum class ControlFlag { kVaried, kConstant, kControlled };
enum class Correction { kNone, kDevice, kBackground, kColormeter };

std::string_view to_string(ControlFlag f);
std::string_view to_string(Correction c);

/// One lightness dataset: which images feed it and which formula turns them into L_f.
struct DatasetSpec {
  std::string dataset_id;
  std::vector<ImageSource> sources;  // empty for colormeter datasets
  ControlFlag environment = ControlFlag::kVaried;
  ControlFlag time = ControlFlag::kVaried;
  ControlFlag device = ControlFlag::kVaried;
  Correction correction = Correction::kNone;

  [[nodiscard]] bool image_based() const { return correction != Correction::kColormeter; }
  [[nodiscard]] bool includes(ImageSource s) const;
};

/// The seven canonical datasets (MEDS, CE, CET, CED, CEDT, Corrected, GroundTruth).
const std::vector<DatasetSpec>& standard_datasets();

/// Throws SchemaError unless the flags and correction match one of the standard rows.
void validate_dataset_spec(const DatasetSpec& spec, const std::string& file = {}, std::size_t line = 0);

struct SchemaIssue {
  std::string file;
  std::size_t line = 0;
  std::string field;
  std::string message;

  [[nodiscard]] std::string describe() const;
};

/// Aggregate of every problem found while validating a bundle.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<SchemaIssue> issues);
  [[nodiscard]] const std::vector<SchemaIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<SchemaIssue> issues_;
};

/// Referentially complete, immutable study data.
class StudyBundle {
 public:
  StudyBundle() = default;
  /// Validates cross-references; throws ValidationError listing every problem.
  StudyBundle(std::vector<SubjectRecord> subjects, std::vector<ImageRecord> images,
              std::vector<DatasetSpec> datasets);

  [[nodiscard]] const std::vector<SubjectRecord>& subjects() const noexcept { return subjects_; }
  [[nodiscard]] const std::vector<ImageRecord>& images() const noexcept { return images_; }
  [[nodiscard]] const std::vector<DatasetSpec>& datasets() const noexcept { return datasets_; }

  [[nodiscard]] const SubjectRecord* find_subject(std::string_view id) const;
  [[nodiscard]] const ImageRecord* find_image(std::string_view id) const;

  /// Rows each dataset would contain: matching images, or subjects with colormeter readings.
  [[nodiscard]] std::map<std::string, std::size_t> dataset_counts() const;

 private:
  std::vector<SubjectRecord> subjects_;
  std::vector<ImageRecord> images_;
  std::vector<DatasetSpec> datasets_;
  std::map<std::string, std::size_t, std::less<>> subject_index_;
  std::map<std::string, std::size_t, std::less<>> image_index_;
};

/// Per-file parsers; each collects row-level issues and throws ValidationError at the end.
std::vector<SubjectRecord> parse_subjects(const CsvTable& table);
std::vector<ImageRecord> parse_images(const CsvTable& table);
std::vector<DatasetSpec> parse_datasets(const CsvTable& table);

/// Loads subjects.csv, images.csv and (optionally) datasets.csv. When datasets_csv is
/// empty the standard seven datasets are used.
StudyBundle ingest_study(const std::filesystem::path& subjects_csv, const std::filesystem::path& images_csv,
                         const std::filesystem::path& datasets_csv = {});

void write_subjects_csv(std::ostream& out, const std::vector<SubjectRecord>& subjects);
void write_images_csv(std::ostream& out, const std::vector<ImageRecord>& images);
void write_datasets_csv(std::ostream& out, const std::vector<DatasetSpec>& datasets);

}  // namespace falmkit
