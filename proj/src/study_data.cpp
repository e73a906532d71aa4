#include "falmkit/study_data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <ostream>
#include <set>

#include "falmkit/csv.hpp"

namespace falmkit {
namespace {

std::string normalise_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

// Howard Hinnant's days_from_civil.
long days_from_civil(long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

bool leap(long y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

struct IssueCollector {
  std::string file;
  std::vector<SchemaIssue> issues;

  void add(std::size_t line, std::string field, std::string message) {
    issues.push_back({file, line, std::move(field), std::move(message)});
  }
  void throw_if_any() {
    if (!issues.empty()) throw ValidationError(std::move(issues));
  }
};

std::optional<ControlFlag> flag_from_string(std::string_view s) {
  const std::string t = normalise_text(s);
  if (t == "varied") return ControlFlag::kVaried;
  if (t == "constant") return ControlFlag::kConstant;
  if (t == "controlled") return ControlFlag::kControlled;
  return std::nullopt;
}

std::optional<Correction> correction_from_string(std::string_view s) {
  const std::string t = normalise_text(s);
  if (t == "none") return Correction::kNone;
  if (t == "device") return Correction::kDevice;
  if (t == "background") return Correction::kBackground;
  if (t == "colormeter") return Correction::kColormeter;
  return std::nullopt;
}

}  // namespace

std::string_view roman(Fst f) {
  static constexpr std::string_view kNames[] = {"I", "II", "III", "IV", "V", "VI"};
  return kNames[ordinal(f) - 1];
}

std::optional<Fst> fst_from_ordinal(int value) {
  if (value < 1 || value > 6) return std::nullopt;
  return static_cast<Fst>(value);
}

const std::vector<std::string>& fst_option_texts() {
  static const std::vector<std::string> kOptions = {
      "Highly sensitive, always burns, never tans",
      "Very sun sensitive, burns easily, tans minimally",
      "Sun sensitive to skin, sometime burns, slowly tans to light brown",
      "Minimally sun sensitive, burns minimally, always tans to moderate brown",
      "Sun insensitive skin, rarely burns, tans well",
      "Sun insensitive, never burns, deeply pigmented",
  };
  return kOptions;
}

Fst parse_fst_response(std::string_view text) {
  const std::string key = normalise_text(text);
  const auto& options = fst_option_texts();
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (normalise_text(options[i]) == key) return static_cast<Fst>(static_cast<int>(i) + 1);
  }
  throw Error(ErrorKind::kSurveyMapping, "unrecognised FST response: \"" + std::string(text) + "\"");
}

std::string_view to_string(ImageSource s) {
  switch (s) {
    case ImageSource::kMeds: return "MEDS";
    case ImageSource::kHistoric: return "Historic";
    case ImageSource::kAcquisition: return "Acquisition";
    case ImageSource::kEnrollment: return "Enrollment";
  }
  return "?";
}

std::optional<ImageSource> image_source_from_string(std::string_view s) {
  const std::string t = normalise_text(s);
  if (t == "meds") return ImageSource::kMeds;
  if (t == "historic") return ImageSource::kHistoric;
  if (t == "acquisition") return ImageSource::kAcquisition;
  if (t == "enrollment") return ImageSource::kEnrollment;
  return std::nullopt;
}

std::string_view to_string(ControlFlag f) {
  switch (f) {
    case ControlFlag::kVaried: return "varied";
    case ControlFlag::kConstant: return "constant";
    case ControlFlag::kControlled: return "controlled";
  }
  return "?";
}

std::string_view to_string(Correction c) {
  switch (c) {
    case Correction::kNone: return "none";
    case Correction::kDevice: return "device";
    case Correction::kBackground: return "background";
    case Correction::kColormeter: return "colormeter";
  }
  return "?";
}

std::optional<CaptureDate> CaptureDate::parse(std::string_view text) {
  const std::string s = trim(text);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
  }
  const long y = std::stol(s.substr(0, 4));
  const auto m = static_cast<unsigned>(std::stoul(s.substr(5, 2)));
  const auto d = static_cast<unsigned>(std::stoul(s.substr(8, 2)));
  static constexpr unsigned kMonthDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m < 1 || m > 12 || d < 1) return std::nullopt;
  const unsigned max_day = kMonthDays[m - 1] + ((m == 2 && leap(y)) ? 1 : 0);
  if (d > max_day) return std::nullopt;
  return CaptureDate{s, days_from_civil(y, m, d)};
}

bool DatasetSpec::includes(ImageSource s) const {
  return std::find(sources.begin(), sources.end(), s) != sources.end();
}

const std::vector<DatasetSpec>& standard_datasets() {
  using enum ControlFlag;
  using S = ImageSource;
  static const std::vector<DatasetSpec> kRows = {
      {"MEDS", {S::kMeds}, kVaried, kVaried, kVaried, Correction::kNone},
      {"CE", {S::kHistoric, S::kAcquisition}, kConstant, kVaried, kVaried, Correction::kNone},
      {"CET", {S::kAcquisition}, kConstant, kConstant, kVaried, Correction::kNone},
      {"CED", {S::kHistoric, S::kAcquisition}, kConstant, kVaried, kControlled, Correction::kDevice},
      {"CEDT", {S::kAcquisition}, kConstant, kConstant, kControlled, Correction::kDevice},
      {"Corrected", {S::kEnrollment}, kConstant, kConstant, kConstant, Correction::kBackground},
      {"GroundTruth", {}, kConstant, kConstant, kConstant, Correction::kColormeter},
  };
  return kRows;
}

void validate_dataset_spec(const DatasetSpec& spec, const std::string& file, std::size_t line) {
  if (spec.dataset_id.empty()) throw SchemaError(file, line, "dataset_id", "empty dataset id");
  const bool matches = std::any_of(standard_datasets().begin(), standard_datasets().end(), [&](const auto& row) {
    return row.environment == spec.environment && row.time == spec.time && row.device == spec.device &&
           row.correction == spec.correction;
  });
  if (!matches) {
    throw SchemaError(file, line, "correction",
                      "flags (" + std::string(to_string(spec.environment)) + ", " +
                          std::string(to_string(spec.time)) + ", " + std::string(to_string(spec.device)) +
                          ") with correction '" + std::string(to_string(spec.correction)) +
                          "' match no known dataset configuration");
  }
  if (spec.image_based() && spec.sources.empty()) {
    throw SchemaError(file, line, "source_filter", "image-based dataset needs at least one image source");
  }
  if (!spec.image_based() && !spec.sources.empty()) {
    throw SchemaError(file, line, "source_filter", "colormeter dataset cannot select image sources");
  }
}

std::string SchemaIssue::describe() const { return SchemaError(file, line, field, message).what(); }

ValidationError::ValidationError(std::vector<SchemaIssue> issues)
    : Error(ErrorKind::kSchema,
            [&] {
              std::string msg = std::to_string(issues.size()) + " schema error(s):";
              for (const auto& i : issues) msg += "\n  " + i.describe();
              return msg;
            }()),
      issues_(std::move(issues)) {}

StudyBundle::StudyBundle(std::vector<SubjectRecord> subjects, std::vector<ImageRecord> images,
                         std::vector<DatasetSpec> datasets)
    : subjects_(std::move(subjects)), images_(std::move(images)), datasets_(std::move(datasets)) {
  IssueCollector issues;
  if (subjects_.empty()) issues.add(0, "", "study has no subjects");
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    if (!subject_index_.emplace(subjects_[i].subject_id, i).second) {
      issues.add(0, "subject_id", "duplicate subject id '" + subjects_[i].subject_id + "'");
    }
  }
  for (std::size_t i = 0; i < images_.size(); ++i) {
    const auto& img = images_[i];
    if (!image_index_.emplace(img.image_id, i).second) {
      issues.issues.push_back({"images.csv", img.line, "image_id", "duplicate image id '" + img.image_id + "'"});
    }
    if (!subject_index_.contains(img.subject_id)) {
      issues.issues.push_back(
          {"images.csv", img.line, "subject_id", "unknown subject '" + img.subject_id + "' (foreign key)"});
    }
    if (img.source == ImageSource::kEnrollment && !img.background) {
      issues.issues.push_back({"images.csv", img.line, "bg_x", "Enrollment image requires a background region"});
    }
  }
  std::set<std::string> dataset_ids;
  for (const auto& d : datasets_) {
    if (!dataset_ids.insert(d.dataset_id).second) {
      issues.issues.push_back({"datasets.csv", 0, "dataset_id", "duplicate dataset id '" + d.dataset_id + "'"});
    }
  }
  issues.throw_if_any();
}

const SubjectRecord* StudyBundle::find_subject(std::string_view id) const {
  const auto it = subject_index_.find(id);
  return it == subject_index_.end() ? nullptr : &subjects_[it->second];
}

const ImageRecord* StudyBundle::find_image(std::string_view id) const {
  const auto it = image_index_.find(id);
  return it == image_index_.end() ? nullptr : &images_[it->second];
}

std::map<std::string, std::size_t> StudyBundle::dataset_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& d : datasets_) {
    std::size_t n = 0;
    if (d.image_based()) {
      n = static_cast<std::size_t>(
          std::count_if(images_.begin(), images_.end(), [&](const auto& img) { return d.includes(img.source); }));
    } else {
      n = static_cast<std::size_t>(
          std::count_if(subjects_.begin(), subjects_.end(), [](const auto& s) { return s.colormeter.has_value(); }));
    }
    counts[d.dataset_id] = n;
  }
  return counts;
}

std::vector<SubjectRecord> parse_subjects(const CsvTable& table) {
  IssueCollector issues{table.source(), {}};
  const std::size_t c_id = table.column("subject_id");
  const std::size_t c_race = table.column("race");
  const std::size_t c_gender = table.column("gender");
  const std::size_t c_age = table.column("age");
  const std::size_t c_fst = table.column("fst_text");
  const std::size_t c_rc = table.column("colormeter_L_rc");
  const std::size_t c_lc = table.column("colormeter_L_lc");

  if (table.rows().empty()) issues.add(1, "", "subjects file has no data rows");
  std::vector<SubjectRecord> out;
  std::set<std::string> seen;
  for (const auto& row : table.rows()) {
    const auto& f = row.fields;
    SubjectRecord s;
    bool ok = true;
    auto fail = [&](const char* field, std::string msg) {
      issues.add(row.line, field, std::move(msg));
      ok = false;
    };
    s.subject_id = trim(f[c_id]);
    if (s.subject_id.empty()) fail("subject_id", "empty subject id");
    else if (!seen.insert(s.subject_id).second) fail("subject_id", "duplicate subject id '" + s.subject_id + "'");
    s.race = trim(f[c_race]);
    if (s.race.empty()) fail("race", "empty race label");
    s.gender = trim(f[c_gender]);
    if (s.gender.empty()) fail("gender", "empty gender label");
    if (auto age = parse_real(f[c_age]); age && *age >= 0.0) {
      s.age = *age;
    } else {
      fail("age", "age must be a non-negative number, got '" + f[c_age] + "'");
    }
    if (!trim(f[c_fst]).empty()) {
      try {
        s.fst = parse_fst_response(f[c_fst]);
      } catch (const Error& e) {
        fail("fst_text", e.what());
      }
    }
    const std::string rc = trim(f[c_rc]);
    const std::string lc = trim(f[c_lc]);
    if (!rc.empty() || !lc.empty()) {
      const auto r = parse_real(rc);
      const auto l = parse_real(lc);
      if (!r || *r < 0.0 || *r > 100.0) fail("colormeter_L_rc", "expected lightness in [0, 100], got '" + rc + "'");
      if (!l || *l < 0.0 || *l > 100.0) fail("colormeter_L_lc", "expected lightness in [0, 100], got '" + lc + "'");
      if (r && l) s.colormeter = ColormeterReading{*r, *l};
    }
    if (ok) out.push_back(std::move(s));
  }
  issues.throw_if_any();
  return out;
}

std::vector<ImageRecord> parse_images(const CsvTable& table) {
  IssueCollector issues{table.source(), {}};
  const std::size_t c_id = table.column("image_id");
  const std::size_t c_subject = table.column("subject_id");
  const std::size_t c_device = table.column("device_id");
  const std::size_t c_date = table.column("capture_date");
  const std::size_t c_env = table.column("environment_tag");
  const std::size_t c_source = table.column("source");
  const std::size_t c_face[4] = {table.column("face_x"), table.column("face_y"), table.column("face_w"),
                                 table.column("face_h")};
  const std::size_t c_bg[4] = {table.column("bg_x"), table.column("bg_y"), table.column("bg_w"),
                               table.column("bg_h")};
  const std::size_t c_path = table.column("path");
  static constexpr const char* kFaceNames[] = {"face_x", "face_y", "face_w", "face_h"};
  static constexpr const char* kBgNames[] = {"bg_x", "bg_y", "bg_w", "bg_h"};

  std::vector<ImageRecord> out;
  for (const auto& row : table.rows()) {
    const auto& f = row.fields;
    ImageRecord img;
    img.line = row.line;
    bool ok = true;
    auto fail = [&](const char* field, std::string msg) {
      issues.add(row.line, field, std::move(msg));
      ok = false;
    };
    img.image_id = trim(f[c_id]);
    if (img.image_id.empty()) fail("image_id", "empty image id");
    img.subject_id = trim(f[c_subject]);
    if (img.subject_id.empty()) fail("subject_id", "empty subject id");
    img.device_id = trim(f[c_device]);
    if (auto d = CaptureDate::parse(f[c_date])) {
      img.capture_date = *d;
    } else {
      fail("capture_date", "expected YYYY-MM-DD, got '" + f[c_date] + "'");
    }
    img.environment_tag = trim(f[c_env]);
    if (auto s = image_source_from_string(f[c_source])) {
      img.source = *s;
    } else {
      fail("source", "unknown source '" + f[c_source] + "' (MEDS|Historic|Acquisition|Enrollment)");
    }
    long long face[4] = {};
    for (int k = 0; k < 4; ++k) {
      const auto v = parse_integer(f[c_face[k]]);
      if (!v) {
        fail(kFaceNames[k], trim(f[c_face[k]]).empty() ? "missing face box coordinate"
                                                      : "face box coordinate must be an integer");
      } else {
        face[k] = *v;
      }
    }
    if (ok) {
      if (face[2] <= 0 || face[3] <= 0) fail("face_w", "face box width and height must be positive");
      img.face_box = {int(face[0]), int(face[1]), int(face[2]), int(face[3])};
    }
    int bg_present = 0;
    long long bg[4] = {};
    for (int k = 0; k < 4; ++k) {
      if (trim(f[c_bg[k]]).empty()) continue;
      ++bg_present;
      if (const auto v = parse_integer(f[c_bg[k]])) bg[k] = *v;
      else fail(kBgNames[k], "background coordinate must be an integer");
    }
    if (bg_present != 0 && bg_present != 4) fail("bg_x", "background region needs all of bg_x,bg_y,bg_w,bg_h");
    if (ok && bg_present == 4) {
      if (bg[2] <= 0 || bg[3] <= 0) fail("bg_w", "background width and height must be positive");
      BackgroundRegion region{int(bg[0]), int(bg[1]), int(bg[2]), int(bg[3])};
      if (overlaps(img.face_box, region)) fail("bg_x", "background region overlaps the face box");
      img.background = region;
    }
    img.path = trim(f[c_path]);
    if (ok) out.push_back(std::move(img));
  }
  issues.throw_if_any();
  return out;
}

std::vector<DatasetSpec> parse_datasets(const CsvTable& table) {
  IssueCollector issues{table.source(), {}};
  const std::size_t c_id = table.column("dataset_id");
  const std::size_t c_filter = table.column("source_filter");
  const std::size_t c_env = table.column("env_flag");
  const std::size_t c_time = table.column("time_flag");
  const std::size_t c_dev = table.column("device_flag");
  const std::size_t c_corr = table.column("correction");
  if (table.rows().empty()) issues.add(1, "", "datasets file has no data rows");

  std::vector<DatasetSpec> out;
  for (const auto& row : table.rows()) {
    const auto& f = row.fields;
    DatasetSpec d;
    bool ok = true;
    auto fail = [&](const char* field, std::string msg) {
      issues.add(row.line, field, std::move(msg));
      ok = false;
    };
    d.dataset_id = trim(f[c_id]);
    const auto env = flag_from_string(f[c_env]);
    const auto time = flag_from_string(f[c_time]);
    const auto dev = flag_from_string(f[c_dev]);
    const auto corr = correction_from_string(f[c_corr]);
    if (!env) fail("env_flag", "expected varied|constant|controlled");
    if (!time) fail("time_flag", "expected varied|constant|controlled");
    if (!dev) fail("device_flag", "expected varied|constant|controlled");
    if (!corr) fail("correction", "expected none|device|background|colormeter");
    if (!ok) continue;
    d.environment = *env;
    d.time = *time;
    d.device = *dev;
    d.correction = *corr;
    const std::string filter = trim(f[c_filter]);
    if (d.correction != Correction::kColormeter) {
      std::size_t start = 0;
      while (start <= filter.size()) {
        const auto bar = filter.find('|', start);
        const std::string token = trim(filter.substr(start, bar == std::string::npos ? std::string::npos : bar - start));
        if (auto s = image_source_from_string(token)) d.sources.push_back(*s);
        else fail("source_filter", "unknown image source '" + token + "'");
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
    } else if (!filter.empty() && normalise_text(filter) != "colormeter") {
      fail("source_filter", "colormeter dataset must use source_filter 'Colormeter'");
    }
    if (!ok) continue;
    try {
      validate_dataset_spec(d, table.source(), row.line);
    } catch (const SchemaError& e) {
      issues.add(row.line, e.field(), e.what());
      continue;
    }
    out.push_back(std::move(d));
  }
  issues.throw_if_any();
  return out;
}

StudyBundle ingest_study(const std::filesystem::path& subjects_csv, const std::filesystem::path& images_csv,
                         const std::filesystem::path& datasets_csv) {
  auto subjects = parse_subjects(read_csv(subjects_csv));
  auto images = parse_images(read_csv(images_csv));
  auto datasets = datasets_csv.empty() ? standard_datasets() : parse_datasets(read_csv(datasets_csv));
  // Re-label image issues with the real file name.
  try {
    return StudyBundle(std::move(subjects), std::move(images), std::move(datasets));
  } catch (const ValidationError& e) {
    auto issues = e.issues();
    for (auto& i : issues) {
      if (i.file == "images.csv") i.file = images_csv.string();
      else if (i.file == "datasets.csv") i.file = datasets_csv.string();
      else if (i.file.empty()) i.file = subjects_csv.string();
    }
    throw ValidationError(std::move(issues));
  }
}

void write_subjects_csv(std::ostream& out, const std::vector<SubjectRecord>& subjects) {
  write_csv_row(out, {"subject_id", "race", "gender", "age", "fst_text", "colormeter_L_rc", "colormeter_L_lc"});
  for (const auto& s : subjects) {
    write_csv_row(out, {s.subject_id, s.race, s.gender, format_fixed(s.age, 1),
                        s.fst ? fst_option_texts()[static_cast<std::size_t>(ordinal(*s.fst) - 1)] : "",
                        s.colormeter ? format_fixed(s.colormeter->right_cheek, 6) : "",
                        s.colormeter ? format_fixed(s.colormeter->left_cheek, 6) : ""});
  }
}

void write_images_csv(std::ostream& out, const std::vector<ImageRecord>& images) {
  write_csv_row(out, {"image_id", "subject_id", "device_id", "capture_date", "environment_tag", "source", "face_x",
                      "face_y", "face_w", "face_h", "bg_x", "bg_y", "bg_w", "bg_h", "path"});
  for (const auto& i : images) {
    auto num = [](int v) { return std::to_string(v); };
    const auto& bg = i.background;
    write_csv_row(out, {i.image_id, i.subject_id, i.device_id, i.capture_date.iso, i.environment_tag,
                        std::string(to_string(i.source)), num(i.face_box.x), num(i.face_box.y),
                        num(i.face_box.width), num(i.face_box.height), bg ? num(bg->x) : "",
                        bg ? num(bg->y) : "", bg ? num(bg->width) : "", bg ? num(bg->height) : "", i.path});
  }
}

void write_datasets_csv(std::ostream& out, const std::vector<DatasetSpec>& datasets) {
  write_csv_row(out, {"dataset_id", "source_filter", "env_flag", "time_flag", "device_flag", "correction"});
  for (const auto& d : datasets) {
    std::string filter;
    for (const auto s : d.sources) {
      if (!filter.empty()) filter += '|';
      filter += to_string(s);
    }
    if (!d.image_based()) filter = "Colormeter";
    write_csv_row(out, {d.dataset_id, filter, std::string(to_string(d.environment)), std::string(to_string(d.time)),
                        std::string(to_string(d.device)), std::string(to_string(d.correction))});
  }
}

}  // namespace falmkit
