#include "falmkit/falm.hpp"

#include <cmath>
#include <ostream>
#include <set>

#include "falmkit/csv.hpp"

namespace falmkit {

double device_normalize(double face_lightness, const DeviceStats& device, const GlobalStats& global) {
  return face_lightness - device.mu_face + global.mu_face;
}

double background_correct(double face_lightness, double background_lightness, const DeviceStats& device) {
  return (face_lightness - background_lightness) + 0.5 * (device.mu_face - device.mu_background);
}

double colormeter_falm(const ColormeterReading& reading) {
  return 0.5 * (reading.right_cheek + reading.left_cheek);
}

std::map<std::string, double> FalmTable::subject_means() const {
  std::map<std::string, double> out;
  for (const auto& [id, values] : values_by_subject()) {
    double sum = 0.0;
    for (double v : values) sum += v;
    out[id] = sum / static_cast<double>(values.size());
  }
  return out;
}

std::map<std::string, std::vector<double>> FalmTable::values_by_subject() const {
  std::map<std::string, std::vector<double>> out;
  for (const auto& r : rows) out[r.subject_id].push_back(r.lightness);
  return out;
}

std::vector<DeviceStats> compute_device_stats(std::span<const ImageMeasurement> measurements) {
  struct Acc {
    double face = 0.0;
    double background = 0.0;
    std::size_t n = 0;
    std::size_t n_bg = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& m : measurements) {
    auto& a = acc[m.device_id];
    a.face += m.face_lightness;
    ++a.n;
    if (m.background_lightness) {
      a.background += *m.background_lightness;
      ++a.n_bg;
    }
  }
  std::vector<DeviceStats> out;
  for (const auto& [id, a] : acc) {
    out.push_back({id, a.face / double(a.n), a.n_bg ? a.background / double(a.n_bg) : 0.0, a.n});
  }
  return out;
}

namespace {

constexpr const char* kMeasurementsFile = "measurements.csv";

const DeviceStats& stats_for(const std::vector<DeviceStats>& stats, const std::string& id) {
  for (const auto& s : stats) {
    if (s.device_id == id) return s;
  }
  throw Error(ErrorKind::kSchema, "no statistics for device '" + id + "'");
}

}  // namespace

FalmTable build_falm_table(const DatasetSpec& spec, std::span<const ImageMeasurement> measurements,
                           std::span<const SubjectRecord> subjects) {
  validate_dataset_spec(spec);
  FalmTable table;
  table.dataset_id = spec.dataset_id;

  if (!spec.image_based()) {
    for (const auto& s : subjects) {
      if (!s.colormeter) continue;
      table.rows.push_back({s.subject_id, "", "", colormeter_falm(*s.colormeter)});
    }
    if (table.rows.empty()) {
      throw SchemaError("subjects.csv", 0, "colormeter_L_rc", "dataset " + spec.dataset_id +
                                                                  " needs colormeter readings but none are present");
    }
    return table;
  }

  std::vector<ImageMeasurement> included;
  for (const auto& m : measurements) {
    if (spec.includes(m.source)) included.push_back(m);
  }
  if (included.empty()) {
    throw SchemaError(kMeasurementsFile, 0, "source", "dataset " + spec.dataset_id + " selects no images");
  }

  const bool needs_device = spec.correction == Correction::kDevice || spec.correction == Correction::kBackground;
  for (const auto& m : included) {
    if (!std::isfinite(m.face_lightness)) {
      throw SchemaError(kMeasurementsFile, m.line, "L_f", "non-finite lightness for image " + m.image_id);
    }
    if (needs_device && m.device_id.empty()) {
      throw SchemaError(kMeasurementsFile, m.line, "device_id",
                        "dataset " + spec.dataset_id + " requires a device id (image " + m.image_id + ")");
    }
    if (spec.correction == Correction::kBackground && !m.background_lightness) {
      throw SchemaError(kMeasurementsFile, m.line, "L_b",
                        "dataset " + spec.dataset_id + " requires background lightness (image " + m.image_id + ")");
    }
  }

  if (spec.environment == ControlFlag::kConstant) {
    for (const auto& m : included) {
      if (m.environment_tag != included.front().environment_tag) {
        throw SchemaError(kMeasurementsFile, m.line, "environment_tag",
                          "dataset " + spec.dataset_id + " requires a constant environment but image " + m.image_id +
                              " has '" + m.environment_tag + "'");
      }
    }
  }
  if (spec.time == ControlFlag::kConstant) {
    std::map<std::string, std::string> date_of;
    for (const auto& m : included) {
      const auto [it, inserted] = date_of.emplace(m.subject_id, m.capture_date);
      if (!inserted && it->second != m.capture_date) {
        throw SchemaError(kMeasurementsFile, m.line, "capture_date",
                          "dataset " + spec.dataset_id + " requires constant time but subject " + m.subject_id +
                              " has images on " + it->second + " and " + m.capture_date);
      }
    }
  }
  if (spec.correction == Correction::kBackground) {
    std::set<std::string> seen;
    for (const auto& m : included) {
      if (!seen.insert(m.subject_id).second) {
        throw SchemaError(kMeasurementsFile, m.line, "subject_id",
                          "dataset " + spec.dataset_id + " allows one image per subject; " + m.subject_id +
                              " has several");
      }
    }
  }

  double sum = 0.0;
  for (const auto& m : included) sum += m.face_lightness;
  const GlobalStats global{sum / static_cast<double>(included.size())};

  if (needs_device) {
    table.devices = compute_device_stats(included);
    table.global = global;
  }

  table.rows.reserve(included.size());
  for (const auto& m : included) {
    double value = m.face_lightness;
    switch (spec.correction) {
      case Correction::kNone:
        break;
      case Correction::kDevice:
        value = device_normalize(m.face_lightness, stats_for(table.devices, m.device_id), global);
        break;
      case Correction::kBackground:
        value = background_correct(m.face_lightness, *m.background_lightness, stats_for(table.devices, m.device_id));
        break;
      case Correction::kColormeter:
        break;
    }
    table.rows.push_back({m.subject_id, m.image_id, m.device_id, value});
  }
  return table;
}

void write_falm_rows(std::ostream& out, const FalmTable& table) {
  for (const auto& r : table.rows) {
    write_csv_row(out, {table.dataset_id, r.subject_id, r.image_id, r.device_id, format_fixed(r.lightness, 6)});
  }
}

void write_falm_csv(std::ostream& out, const FalmTable& table) {
  write_csv_row(out, {"dataset_id", "subject_id", "image_id", "device_id", "L_f"});
  write_falm_rows(out, table);
}

FalmTable read_falm_csv(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const auto c_ds = csv.column("dataset_id");
  const auto c_subject = csv.column("subject_id");
  const auto c_image = csv.column("image_id");
  const auto c_device = csv.column("device_id");
  const auto c_l = csv.column("L_f");
  FalmTable table;
  for (const auto& row : csv.rows()) {
    const auto& f = row.fields;
    const std::string ds = trim(f[c_ds]);
    if (table.dataset_id.empty()) table.dataset_id = ds;
    if (ds != table.dataset_id) {
      throw SchemaError(csv.source(), row.line, "dataset_id", "mixed dataset ids in one FALM table");
    }
    const auto l = parse_real(f[c_l]);
    if (!l) throw SchemaError(csv.source(), row.line, "L_f", "expected a finite number, got '" + f[c_l] + "'");
    const std::string subject = trim(f[c_subject]);
    if (subject.empty()) throw SchemaError(csv.source(), row.line, "subject_id", "empty subject id");
    table.rows.push_back({subject, trim(f[c_image]), trim(f[c_device]), *l});
  }
  if (table.rows.empty()) throw SchemaError(csv.source(), 1, "", "FALM table has no rows");
  return table;
}

void write_measurements_csv(std::ostream& out, std::span<const ImageMeasurement> rows) {
  write_csv_row(out, {"image_id", "subject_id", "device_id", "capture_date", "environment_tag", "source", "L_f", "L_b"});
  for (const auto& m : rows) {
    write_csv_row(out, {m.image_id, m.subject_id, m.device_id, m.capture_date, m.environment_tag,
                        std::string(to_string(m.source)), format_fixed(m.face_lightness, 6),
                        m.background_lightness ? format_fixed(*m.background_lightness, 6) : ""});
  }
}

std::vector<ImageMeasurement> read_measurements_csv(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const auto c_id = csv.column("image_id");
  const auto c_subject = csv.column("subject_id");
  const auto c_device = csv.column("device_id");
  const auto c_date = csv.column("capture_date");
  const auto c_env = csv.column("environment_tag");
  const auto c_source = csv.column("source");
  const auto c_lf = csv.column("L_f");
  const auto c_lb = csv.column("L_b");
  std::vector<ImageMeasurement> out;
  for (const auto& row : csv.rows()) {
    const auto& f = row.fields;
    ImageMeasurement m;
    m.line = row.line;
    m.image_id = trim(f[c_id]);
    m.subject_id = trim(f[c_subject]);
    m.device_id = trim(f[c_device]);
    m.capture_date = trim(f[c_date]);
    m.environment_tag = trim(f[c_env]);
    const auto src = image_source_from_string(f[c_source]);
    if (!src) throw SchemaError(csv.source(), row.line, "source", "unknown source '" + f[c_source] + "'");
    m.source = *src;
    const auto lf = parse_real(f[c_lf]);
    if (!lf) throw SchemaError(csv.source(), row.line, "L_f", "expected a finite number, got '" + f[c_lf] + "'");
    m.face_lightness = *lf;
    if (!trim(f[c_lb]).empty()) {
      const auto lb = parse_real(f[c_lb]);
      if (!lb) throw SchemaError(csv.source(), row.line, "L_b", "expected a finite number, got '" + f[c_lb] + "'");
      m.background_lightness = *lb;
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace falmkit
