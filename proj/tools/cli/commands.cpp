#include "cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "cli/config.hpp"
#include "cli/manifest.hpp"
#include "cli/svg.hpp"
#include "falmkit/csv.hpp"
#include "falmkit/error.hpp"
#include "falmkit/image.hpp"
#include "falmkit/parallel.hpp"
#include "falmkit/stats.hpp"

namespace falmkit::cli {
namespace {

using json = nlohmann::ordered_json;

constexpr const char* kGroundTruthId = "GroundTruth";

// ---- settings ------------------------------------------------------------------------------

struct RealKey {
  const char* key;
  double PopulationSpec::*member;
};
struct CountKey {
  const char* key;
  std::size_t PopulationSpec::*member;
};

const RealKey kPopulationReals[] = {
    {"within_group_sd", &PopulationSpec::within_group_sd},
    {"female_fraction", &PopulationSpec::female_fraction},
    {"age_mean", &PopulationSpec::age_mean},
    {"age_sd", &PopulationSpec::age_sd},
    {"age_min", &PopulationSpec::age_min},
    {"age_max", &PopulationSpec::age_max},
    {"fst_lightness_weight", &PopulationSpec::fst_lightness_weight},
    {"colormeter_sd", &PopulationSpec::colormeter_sd},
    {"subject_bias_sd", &PopulationSpec::subject_bias_sd},
    {"subject_device_sd", &PopulationSpec::subject_device_sd},
    {"device_sd", &PopulationSpec::device_sd},
    {"time_sd", &PopulationSpec::time_sd},
    {"image_sd", &PopulationSpec::image_sd},
    {"noise_scale", &PopulationSpec::noise_scale},
    {"enrollment_exposure_sd", &PopulationSpec::enrollment_exposure_sd},
    {"enrollment_noise_sd", &PopulationSpec::enrollment_noise_sd},
    {"background_noise_sd", &PopulationSpec::background_noise_sd},
    {"background_lightness", &PopulationSpec::background_lightness},
    {"meds_offset", &PopulationSpec::meds_offset},
    {"pixel_noise", &PopulationSpec::pixel_noise},
    {"specular_fraction", &PopulationSpec::specular_fraction},
};

const CountKey kPopulationCounts[] = {
    {"n_subjects", &PopulationSpec::n_subjects},
    {"n_devices", &PopulationSpec::n_devices},
    {"acquisition_devices", &PopulationSpec::acquisition_devices},
    {"historic_visits", &PopulationSpec::historic_visits},
    {"historic_images_per_visit", &PopulationSpec::historic_images_per_visit},
    {"meds_subjects", &PopulationSpec::meds_subjects},
    {"meds_images_per_subject", &PopulationSpec::meds_images_per_subject},
};

std::set<std::string> population_keys() {
  std::set<std::string> keys{"image_size", "study_date", "groups", "group_proportions", "group_means",
                             "group_fst_weights"};
  for (const auto& k : kPopulationReals) keys.insert(k.key);
  for (const auto& k : kPopulationCounts) keys.insert(k.key);
  return keys;
}

const std::set<std::string> kSimulationKeys = {"beta0",     "beta_gender", "beta_age",   "beta_falm",
                                               "beta_race", "sigma",       "replicates", "resample_n",
                                               "start",     "datasets",    "noise_levels", "noise_dataset",
                                               "ground_truth_dataset", "render"};

std::set<std::string> keys_for(const std::string& command) {
  std::set<std::string> keys{"seed"};
  auto add = [&](const std::set<std::string>& more) { keys.insert(more.begin(), more.end()); };
  if (command == "synth") add(population_keys());
  if (command == "measure") add({"radius_fraction", "outlier_k"});
  if (command == "analyze") add({"bootstrap_replicates", "confidence", "ground_truth_dataset", "histogram_dataset"});
  if (command == "simulate") {
    add(population_keys());
    add(kSimulationKeys);
    add({"radius_fraction", "outlier_k"});
  }
  return keys;
}

Settings load_settings(const std::string& command, const GlobalOptions& global) {
  Settings s(keys_for(command));
  if (global.config) s.load_file(*global.config);
  for (const auto& pair : global.set_pairs) s.set_pair(pair);
  for (const auto& [k, v] : global.flag_settings) s.set(k, v);
  return s;
}

std::uint64_t resolve_seed(const GlobalOptions& global, const Settings& settings) {
  if (global.seed) return *global.seed;
  if (auto v = settings.u64("seed")) return *v;
  if (const char* env = std::getenv("FALMKIT_SEED"); env && *env) {
    Settings tmp({"FALMKIT_SEED"});
    tmp.set("FALMKIT_SEED", env);
    return *tmp.u64("FALMKIT_SEED");
  }
  return 1;
}

/// Effective configuration recorded in the manifest: explicit settings plus the resolved seed.
std::map<std::string, std::string> effective(const Settings& settings, std::uint64_t seed) {
  auto m = settings.values();
  m["seed"] = std::to_string(seed);
  return m;
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::kConfig, "cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kConfig, "cannot write " + path.string());
  out << text;
}

std::string stamp(const GlobalOptions& global, const std::string& command) {
  return global.deterministic ? std::string() : "falmkit " + command + " " + utc_timestamp();
}

std::string fx(double v, int d = 6) { return format_fixed(v, d); }

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw Error(ErrorKind::kConfig, what + " is required");
  if (!fs::is_regular_file(p)) throw Error(ErrorKind::kConfig, what + " not found: " + p.string());
}

MaskParams mask_from(const Settings& s) {
  MaskParams m;
  m.radius_fraction = s.real("radius_fraction", m.radius_fraction);
  if (s.has("outlier_k")) {
    const std::string t = s.text("outlier_k", "");
    m.outlier_k = (t == "inf" || t == "none") ? std::numeric_limits<double>::infinity() : s.real("outlier_k", 3.0);
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  return m;
}

// ---- tables --------------------------------------------------------------------------------

std::vector<fs::path> table_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kConfig, "tables directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::kConfig, "no .csv tables in " + dir.string());
  return files;
}

std::map<std::string, FalmTable> read_tables(const std::vector<fs::path>& files) {
  std::map<std::string, FalmTable> out;
  for (const auto& f : files) {
    FalmTable t = read_falm_csv(f);
    if (out.count(t.dataset_id)) throw SchemaError(f.string(), 0, "dataset_id", "duplicate table " + t.dataset_id);
    out.emplace(t.dataset_id, std::move(t));
  }
  return out;
}

/// Canonical presentation order: the standard datasets first, then any others by id.
std::vector<std::string> ordered_ids(const std::map<std::string, FalmTable>& tables) {
  std::vector<std::string> ids;
  for (const auto& ds : standard_datasets()) {
    if (tables.count(ds.dataset_id)) ids.push_back(ds.dataset_id);
  }
  for (const auto& [id, t] : tables) {
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  return ids;
}

std::vector<SubjectRecord> read_subjects(const fs::path& p) {
  require_file(p, "subjects.csv");
  auto subjects = parse_subjects(read_csv(p));
  if (subjects.empty()) throw SchemaError(p.string(), 1, "", "no subjects");
  return subjects;
}

std::vector<std::string> two_levels(const std::vector<std::string>& labels, const std::string& field) {
  std::set<std::string> levels(labels.begin(), labels.end());
  if (levels.size() > 2) {
    throw SchemaError("subjects.csv", 0, field, "expected at most two " + field + " labels, found " +
                                                    std::to_string(levels.size()));
  }
  return {levels.begin(), levels.end()};
}

void write_experiment_csv(std::ostream& out, const ExperimentResult& r, const std::string& prefix = {}) {
  for (const auto& d : r.datasets) {
    for (const auto& t : d.terms) {
      std::vector<std::string> row;
      if (!prefix.empty()) row.push_back(prefix);
      row.insert(row.end(), {d.dataset_id, t.term, fx(t.selection_frequency), fx(t.coef_mean), fx(t.ci_low),
                             fx(t.ci_high)});
      write_csv_row(out, row);
    }
  }
}

json experiment_json(const ExperimentResult& r) {
  json datasets = json::array();
  for (const auto& d : r.datasets) {
    json terms = json::array();
    for (const auto& t : d.terms) {
      terms.push_back({{"term", t.term},
                       {"selection_frequency", t.selection_frequency},
                       {"times_selected", t.times_selected},
                       {"coef_mean", num_or_null(t.coef_mean)},
                       {"ci_low", num_or_null(t.ci_low)},
                       {"ci_high", num_or_null(t.ci_high)}});
    }
    datasets.push_back({{"dataset_id", d.dataset_id},
                        {"intercept_only_frequency", d.intercept_only_frequency},
                        {"singular_warnings", d.singular_warnings},
                        {"terms", terms}});
  }
  return {{"population_size", r.population_size}, {"datasets", datasets}};
}

json sim_config_json(const SimConfig& c) {
  return {{"beta0", c.beta0},           {"beta_gender", c.beta_gender}, {"beta_age", c.beta_age},
          {"beta_falm", c.beta_falm},   {"beta_race", c.beta_race},     {"sigma", c.sigma},
          {"replicates", c.replicates}, {"resample_n", c.resample_n},   {"seed", c.seed},
          {"start", c.start == StepwiseStart::kFull ? "full" : "intercept"}};
}

json skipped_json(const std::vector<std::pair<std::string, std::string>>& skipped) {
  json a = json::array();
  for (const auto& [id, why] : skipped) a.push_back({{"dataset_id", id}, {"status", "SKIPPED"}, {"reason", why}});
  return a;
}

std::string selection_svg(const ExperimentResult& r, const std::string& st) {
  std::vector<std::string> cats;
  std::vector<BarSeries> series;
  for (const auto& name : {kTermGender, kTermAge, kTermLightness, kTermRace}) series.push_back({name, {}, {}, {}});
  for (const auto& d : r.datasets) {
    cats.push_back(d.dataset_id);
    for (std::size_t i = 0; i < 4; ++i) series[i].values.push_back(d.terms[i].selection_frequency);
  }
  return bar_chart({"Proportion of replicates selecting each term", "dataset", "selection frequency", st}, cats, series,
                   1.0);
}

std::string coefficient_svg(const ExperimentResult& r, const std::string& st) {
  std::vector<std::string> cats;
  std::vector<BarSeries> series;
  for (const auto& name : {kTermGender, kTermAge, kTermLightness, kTermRace}) series.push_back({name, {}, {}, {}});
  for (const auto& d : r.datasets) {
    cats.push_back(d.dataset_id);
    for (std::size_t i = 0; i < 4; ++i) {
      series[i].values.push_back(d.terms[i].coef_mean);
      series[i].error_low.push_back(d.terms[i].ci_low);
      series[i].error_high.push_back(d.terms[i].ci_high);
    }
  }
  return bar_chart({"Mean coefficient when selected (95% interval)", "dataset", "coefficient", st}, cats, series);
}

SimConfig sim_config_from(const Settings& s, std::uint64_t seed, unsigned jobs) {
  SimConfig c;
  c.beta0 = s.real("beta0", c.beta0);
  c.beta_gender = s.real("beta_gender", c.beta_gender);
  c.beta_age = s.real("beta_age", c.beta_age);
  c.beta_falm = s.real("beta_falm", c.beta_falm);
  c.beta_race = s.real("beta_race", c.beta_race);
  c.sigma = s.real("sigma", c.sigma);
  c.replicates = s.count("replicates", c.replicates);
  c.resample_n = s.count("resample_n", c.resample_n);
  const std::string start = s.text("start", "full");
  if (start == "full") {
    c.start = StepwiseStart::kFull;
  } else if (start == "intercept") {
    c.start = StepwiseStart::kInterceptOnly;
  } else {
    throw Error(ErrorKind::kConfig, "start must be 'full' or 'intercept', got '" + start + "'");
  }
  c.seed = seed;
  c.jobs = jobs;
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  return c;
}

}  // namespace

// ---- shared building blocks ---------------------------------------------------------------

PopulationSpec population_from_settings(const Settings& s) {
  PopulationSpec spec;
  for (const auto& k : kPopulationReals) spec.*(k.member) = s.real(k.key, spec.*(k.member));
  for (const auto& k : kPopulationCounts) spec.*(k.member) = s.count(k.key, spec.*(k.member));
  spec.image_size = static_cast<int>(s.count("image_size", static_cast<std::size_t>(spec.image_size)));
  spec.study_date = s.text("study_date", spec.study_date);

  const auto labels = s.list("groups");
  const auto proportions = s.reals("group_proportions", {});
  const auto means = s.reals("group_means", {});
  if (!labels.empty()) {
    if (proportions.size() != labels.size() || means.size() != labels.size()) {
      throw Error(ErrorKind::kConfig, "groups, group_proportions and group_means must have equal lengths");
    }
    std::vector<GroupSpec> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      GroupSpec g{labels[i], proportions[i], means[i], {}};
      if (i < spec.groups.size()) g.fst_weights = spec.groups[i].fst_weights;
      groups.push_back(g);
    }
    spec.groups = groups;
  } else if (!proportions.empty() || !means.empty()) {
    if ((!proportions.empty() && proportions.size() != spec.groups.size()) ||
        (!means.empty() && means.size() != spec.groups.size())) {
      throw Error(ErrorKind::kConfig, "group_proportions/group_means need one value per group");
    }
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
      if (!proportions.empty()) spec.groups[i].proportion = proportions[i];
      if (!means.empty()) spec.groups[i].mean_lightness = means[i];
    }
  }
  if (s.has("group_fst_weights")) {
    std::stringstream ss(s.text("group_fst_weights", ""));
    std::string block;
    std::size_t g = 0;
    for (; std::getline(ss, block, ';'); ++g) {
      if (g >= spec.groups.size()) throw Error(ErrorKind::kConfig, "group_fst_weights has more blocks than groups");
      Settings tmp({"w"});
      tmp.set("w", block);
      const auto w = tmp.reals("w", {});
      if (w.size() != 6) throw Error(ErrorKind::kConfig, "group_fst_weights blocks need 6 values");
      std::copy(w.begin(), w.end(), spec.groups[g].fst_weights.begin());
    }
    if (g != spec.groups.size()) throw Error(ErrorKind::kConfig, "group_fst_weights needs one block per group");
  }
  spec.validate();
  return spec;
}

BuiltTables build_tables(const std::vector<DatasetSpec>& datasets, const std::vector<ImageMeasurement>& measurements,
                         const std::vector<SubjectRecord>& subjects) {
  BuiltTables out;
  for (const auto& ds : datasets) {
    if (ds.image_based()) {
      const bool any = std::any_of(measurements.begin(), measurements.end(),
                                   [&](const ImageMeasurement& m) { return ds.includes(m.source); });
      if (!any) {
        out.skipped.emplace_back(ds.dataset_id, "no measured images from its sources");
        continue;
      }
    } else if (std::none_of(subjects.begin(), subjects.end(),
                            [](const SubjectRecord& s) { return s.colormeter.has_value(); })) {
      out.skipped.emplace_back(ds.dataset_id, "no colormeter readings");
      continue;
    }
    out.tables.emplace(ds.dataset_id, build_falm_table(ds, measurements, subjects));
  }
  return out;
}

SimInputs simulation_inputs(const std::vector<SubjectRecord>& subjects, const std::map<std::string, FalmTable>& tables,
                            const std::string& ground_truth_id, const std::vector<std::string>& only) {
  const auto gt_it = tables.find(ground_truth_id);
  if (gt_it == tables.end()) {
    throw SchemaError("", 0, "dataset_id", "ground-truth table '" + ground_truth_id + "' is required for simulation");
  }
  const auto gt = gt_it->second.subject_means();
  std::map<std::string, const SubjectRecord*> by_id;
  for (const auto& s : subjects) by_id[s.subject_id] = &s;

  SimInputs in;
  std::vector<std::string> genders;
  std::vector<std::string> races;
  std::vector<const SubjectRecord*> members;
  for (const auto& [id, value] : gt) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw SchemaError("", 0, "subject_id", "ground-truth subject " + id + " not in subjects.csv");
    members.push_back(it->second);
    genders.push_back(it->second->gender);
    races.push_back(it->second->race);
  }
  const auto gender_levels = two_levels(genders, "gender");
  const auto race_levels = two_levels(races, "race");
  for (const auto* s : members) {
    in.population.push_back({s->subject_id, gender_levels.size() == 2 && s->gender == gender_levels[1] ? 1.0 : 0.0,
                             s->age, race_levels.size() == 2 && s->race == race_levels[1] ? 1.0 : 0.0,
                             gt.at(s->subject_id)});
  }

  std::vector<std::string> ids = only.empty() ? ordered_ids(tables) : only;
  for (const auto& id : ids) {
    const auto t = tables.find(id);
    if (t == tables.end()) throw Error(ErrorKind::kConfig, "requested dataset '" + id + "' has no table");
    const auto means = t->second.subject_means();
    DatasetEstimate est{id, {}};
    std::size_t missing = 0;
    for (const auto& p : in.population) {
      const auto m = means.find(p.subject_id);
      if (m == means.end()) {
        ++missing;
      } else {
        est.lightness.push_back(m->second);
      }
    }
    if (missing > 0) {
      const std::string why = std::to_string(missing) + " ground-truth subjects have no value";
      if (!only.empty()) throw SchemaError("", 0, "subject_id", "dataset " + id + ": " + why);
      in.skipped.emplace_back(id, why);
      continue;
    }
    in.estimates.push_back(std::move(est));
  }
  return in;
}

// ---- synth ---------------------------------------------------------------------------------

int cmd_synth(const GlobalOptions& global, const SynthOptions& options, std::ostream& log) {
  const Settings settings = load_settings("synth", global);
  const std::uint64_t seed = resolve_seed(global, settings);
  const PopulationSpec spec = population_from_settings(settings);
  prepare_out(global.out);

  const SyntheticStudy study = generate_synthetic_study(spec, seed);
  const auto& bundle = study.bundle;
  {
    std::ofstream f(global.out / "subjects.csv", std::ios::binary);
    write_subjects_csv(f, bundle.subjects());
  }
  {
    std::ofstream f(global.out / "images.csv", std::ios::binary);
    write_images_csv(f, bundle.images());
  }
  {
    std::ofstream f(global.out / "datasets.csv", std::ios::binary);
    write_datasets_csv(f, bundle.datasets());
  }
  {
    std::ofstream f(global.out / "truth_subjects.csv", std::ios::binary);
    write_csv_row(f, {"subject_id", "true_L"});
    for (std::size_t i = 0; i < bundle.subjects().size(); ++i) {
      write_csv_row(f, {bundle.subjects()[i].subject_id, fx(study.true_lightness[i])});
    }
  }
  {
    std::ofstream f(global.out / "truth_images.csv", std::ios::binary);
    write_csv_row(f, {"image_id", "intended_L_f", "intended_L_b"});
    for (std::size_t i = 0; i < bundle.images().size(); ++i) {
      write_csv_row(f, {bundle.images()[i].image_id, fx(study.intended_face[i]), fx(study.intended_background[i])});
    }
  }
  if (options.write_images) {
    fs::create_directories(global.out / "images");
    parallel_for(bundle.images().size(), global.jobs, [&](std::size_t i) {
      write_bmp(global.out / bundle.images()[i].path, render_study_image(study, i, spec, seed));
    });
  }
  RunManifest manifest{"synth", seed, effective(settings, seed), {}, global.deterministic};
  manifest.write(global.out);
  log << "synth: " << bundle.subjects().size() << " subjects, " << bundle.images().size() << " images -> "
      << global.out.string() << "\n";
  return kOk;
}

// ---- measure -------------------------------------------------------------------------------

int cmd_measure(const GlobalOptions& global, const MeasureOptions& options, std::ostream& log) {
  const Settings settings = load_settings("measure", global);
  const std::uint64_t seed = resolve_seed(global, settings);
  const MaskParams mask = mask_from(settings);
  require_file(options.subjects, "subjects.csv");
  require_file(options.images, "images.csv");
  if (read_csv(options.images).rows().empty()) throw Error(ErrorKind::kConfig, "images.csv lists no images");

  const StudyBundle bundle = ingest_study(options.subjects, options.images);
  const fs::path base = options.images.parent_path();
  const auto& images = bundle.images();

  struct Slot {
    std::optional<ImageMeasurement> ok;
    std::string kind;
    std::string message;
  };
  std::vector<Slot> slots(images.size());
  parallel_for(images.size(), global.jobs, [&](std::size_t i) {
    const auto& rec = images[i];
    try {
      const fs::path p = fs::path(rec.path).is_absolute() ? fs::path(rec.path) : base / rec.path;
      const Image img = read_image(p);
      ImageMeasurement m{rec.image_id, rec.subject_id, rec.device_id, rec.capture_date.iso, rec.environment_tag,
                         rec.source, image_falm(img, rec.face_box, mask), std::nullopt, rec.line};
      if (rec.background) m.background_lightness = background_lightness(img, *rec.background, &rec.face_box);
      slots[i].ok = std::move(m);
    } catch (const Error& e) {
      slots[i].kind = exit_code_for(e) == kNumerical ? "numerical" : "data";
      slots[i].message = e.what();
    } catch (const std::exception& e) {
      slots[i].kind = "data";
      slots[i].message = e.what();
    }
  });

  prepare_out(global.out);
  std::vector<ImageMeasurement> rows;
  std::size_t failures = 0;
  {
    std::ofstream f(global.out / "failures.csv", std::ios::binary);
    write_csv_row(f, {"image_id", "line", "kind", "message"});
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i].ok) {
        rows.push_back(*slots[i].ok);
      } else {
        ++failures;
        write_csv_row(f, {images[i].image_id, std::to_string(images[i].line), slots[i].kind, slots[i].message});
        log << "measure: " << images[i].image_id << ": " << slots[i].message << "\n";
      }
    }
  }
  {
    std::ofstream f(global.out / "measurements.csv", std::ios::binary);
    write_measurements_csv(f, rows);
  }
  RunManifest manifest{"measure", seed, effective(settings, seed),
                       {{"subjects", options.subjects}, {"images", options.images}}, global.deterministic};
  manifest.write(global.out);
  log << "measure: " << rows.size() << " measured, " << failures << " failed\n";
  return failures > 0 ? kData : kOk;
}

// ---- build-datasets ------------------------------------------------------------------------

int cmd_build_datasets(const GlobalOptions& global, const BuildOptions& options, std::ostream& log) {
  const Settings settings = load_settings("build-datasets", global);
  const std::uint64_t seed = resolve_seed(global, settings);
  require_file(options.measurements, "measurements.csv");
  const auto subjects = read_subjects(options.subjects);
  std::vector<DatasetSpec> datasets = standard_datasets();
  if (options.datasets) {
    require_file(*options.datasets, "datasets.csv");
    datasets = parse_datasets(read_csv(*options.datasets));
  }
  const auto measurements = read_measurements_csv(options.measurements);

  prepare_out(global.out);
  const fs::path dir = global.out / "tables";
  fs::create_directories(dir);
  std::ofstream summary(global.out / "datasets_summary.csv", std::ios::binary);
  write_csv_row(summary, {"dataset_id", "status", "rows", "subjects", "devices", "message"});
  std::size_t failed = 0;
  for (const auto& ds : datasets) {
    try {
      BuiltTables built = build_tables({ds}, measurements, subjects);
      if (!built.skipped.empty()) {
        write_csv_row(summary, {ds.dataset_id, "SKIPPED", "0", "0", "0", built.skipped.front().second});
        continue;
      }
      const FalmTable& t = built.tables.at(ds.dataset_id);
      std::ofstream f(dir / (ds.dataset_id + ".csv"), std::ios::binary);
      write_falm_csv(f, t);
      write_csv_row(summary, {ds.dataset_id, "OK", std::to_string(t.rows.size()),
                              std::to_string(t.subject_means().size()), std::to_string(t.devices.size()), ""});
    } catch (const Error& e) {
      ++failed;
      write_csv_row(summary, {ds.dataset_id, "FAILED", "0", "0", "0", e.what()});
      log << "build-datasets: " << ds.dataset_id << ": " << e.what() << "\n";
    }
  }
  std::vector<ManifestInput> inputs{{"measurements", options.measurements}, {"subjects", options.subjects}};
  if (options.datasets) inputs.push_back({"datasets", *options.datasets});
  RunManifest manifest{"build-datasets", seed, effective(settings, seed), inputs, global.deterministic};
  manifest.write(global.out);
  return failed > 0 ? kData : kOk;
}

// ---- analyze -------------------------------------------------------------------------------

int cmd_analyze(const GlobalOptions& global, const AnalyzeOptions& options, std::ostream& log) {
  const Settings settings = load_settings("analyze", global);
  const std::uint64_t seed = resolve_seed(global, settings);
  const std::size_t boot = settings.count("bootstrap_replicates", 1000);
  const double confidence = settings.real("confidence", 0.95);
  if (boot < 100) throw Error(ErrorKind::kConfig, "bootstrap_replicates must be >= 100");
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorKind::kConfig, "confidence must be in (0, 1)");
  const std::string gt_id = settings.text("ground_truth_dataset", kGroundTruthId);
  const std::string hist_id = settings.text("histogram_dataset", "CE");

  const auto subjects = read_subjects(options.subjects);
  const auto files = table_files(options.tables);
  const auto tables = read_tables(files);
  const auto ids = ordered_ids(tables);
  std::map<std::string, std::string> race_of;
  std::map<std::string, const SubjectRecord*> by_id;
  for (const auto& s : subjects) {
    race_of[s.subject_id] = s.race;
    by_id[s.subject_id] = &s;
  }
  for (const auto& [id, t] : tables) {
    for (const auto& r : t.rows) {
      if (!by_id.count(r.subject_id)) {
        throw SchemaError(id + ".csv", 0, "subject_id", "subject " + r.subject_id + " not in subjects.csv");
      }
    }
  }
  std::set<std::string> race_set;
  for (const auto& s : subjects) race_set.insert(s.race);
  const std::vector<std::string> races(race_set.begin(), race_set.end());

  prepare_out(global.out);
  const std::string st = stamp(global, "analyze");
  json report;
  report["ground_truth_dataset"] = gt_id;
  json skipped = json::array();
  auto skip = [&](const std::string& analysis, const std::string& why) {
    skipped.push_back({{"analysis", analysis}, {"status", "SKIPPED"}, {"reason", why}});
    log << "analyze: SKIPPED " << analysis << ": " << why << "\n";
  };

  // EER per dataset over every row of the table.
  std::map<std::string, EerResult> eers;
  {
    std::ofstream f(global.out / "eer.csv", std::ios::binary);
    write_csv_row(f, {"dataset_id", "status", "n_values", "eer", "threshold", "group_above"});
    json arr = json::array();
    for (const auto& id : ids) {
      std::map<std::string, std::vector<double>> by_group;
      for (const auto& r : tables.at(id).rows) by_group[race_of[r.subject_id]].push_back(r.lightness);
      if (by_group.size() != 2) {
        write_csv_row(f, {id, "SKIPPED", std::to_string(tables.at(id).rows.size()), "NA", "NA", ""});
        skip("eer:" + id, "needs exactly two race groups");
        continue;
      }
      const auto& a = by_group.begin();
      const auto& b = std::next(by_group.begin());
      const EerResult e = eer(a->second, b->second);
      eers[id] = e;
      const std::string above = e.a_above ? a->first : b->first;
      write_csv_row(f, {id, "OK", std::to_string(tables.at(id).rows.size()), fx(e.eer), fx(e.threshold), above});
      arr.push_back({{"dataset_id", id}, {"eer", e.eer}, {"threshold", e.threshold}, {"group_above", above}});
    }
    report["eer"] = arr;
  }

  // Intra-subject range.
  std::map<std::string, IntraSubjectRange> ranges;
  {
    std::ofstream f(global.out / "range.csv", std::ios::binary);
    write_csv_row(f, {"dataset_id", "group", "n_subjects", "mean_range", "sd_range"});
    json arr = json::array();
    for (const auto& id : ids) {
      const auto r = intra_subject_range(tables.at(id).values_by_subject(), race_of);
      for (const auto& [g, sum] : r.per_group) {
        write_csv_row(f, {id, g, std::to_string(sum.n_subjects), fx(sum.mean), fx(sum.sd)});
        arr.push_back({{"dataset_id", id}, {"group", g}, {"n_subjects", sum.n_subjects}, {"mean_range", sum.mean},
                       {"sd_range", sum.sd}});
      }
      ranges[id] = r;
    }
    report["range"] = arr;
  }

  const bool have_gt = tables.count(gt_id) > 0;
  std::map<std::string, double> gt;
  if (have_gt) gt = tables.at(gt_id).subject_means();

  // Correlation with ground truth.
  std::map<std::string, CorrelationResult> correlations;
  {
    std::ofstream f(global.out / "correlation.csv", std::ios::binary);
    write_csv_row(f, {"dataset_id", "status", "n", "rho", "ci_low", "ci_high"});
    json arr = json::array();
    for (const auto& id : ids) {
      if (!have_gt) {
        write_csv_row(f, {id, "SKIPPED", "0", "NA", "NA", "NA"});
        skip("correlation:" + id, "ground-truth table '" + gt_id + "' missing");
        continue;
      }
      std::vector<double> x;
      std::vector<double> y;
      for (const auto& [sid, v] : tables.at(id).subject_means()) {
        if (const auto g = gt.find(sid); g != gt.end()) {
          x.push_back(v);
          y.push_back(g->second);
        }
      }
      if (x.size() < 3) {
        write_csv_row(f, {id, "SKIPPED", std::to_string(x.size()), "NA", "NA", "NA"});
        skip("correlation:" + id, "fewer than 3 subjects shared with ground truth");
        continue;
      }
      try {
        const auto c = pearson(x, y, confidence);
        correlations[id] = c;
        write_csv_row(f, {id, "OK", std::to_string(c.n), fx(c.rho), fx(c.ci_low), fx(c.ci_high)});
        arr.push_back({{"dataset_id", id}, {"n", c.n}, {"rho", c.rho}, {"ci_low", c.ci_low}, {"ci_high", c.ci_high}});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDegenerate) throw;
        write_csv_row(f, {id, "SKIPPED", std::to_string(x.size()), "NA", "NA", "NA"});
        skip("correlation:" + id, e.what());
      }
    }
    report["correlation"] = arr;
  }

  // FST, race and ground truth.
  std::vector<std::string> fst_outputs = {"fst_race.csv", "tau.csv", "models.csv"};
  if (!have_gt) {
    for (const auto& name : fst_outputs) {
      std::ofstream f(global.out / name, std::ios::binary);
      write_csv_row(f, {"status", "reason"});
      write_csv_row(f, {"SKIPPED", "ground-truth table '" + gt_id + "' missing"});
    }
    skip("fst", "ground-truth table '" + gt_id + "' missing");
  } else {
    std::vector<double> light;
    std::vector<double> fst;
    std::vector<std::string> race;
    for (const auto& [sid, v] : gt) {
      const auto* s = by_id.at(sid);
      if (!s->fst) continue;
      light.push_back(v);
      fst.push_back(ordinal(*s->fst));
      race.push_back(s->race);
    }
    std::set<std::string> present(race.begin(), race.end());
    if (present.size() != 2 || light.size() < 10) {
      for (const auto& name : fst_outputs) {
        std::ofstream f(global.out / name, std::ios::binary);
        write_csv_row(f, {"status", "reason"});
        write_csv_row(f, {"SKIPPED", "needs two race groups and >= 10 subjects with FST and ground truth"});
      }
      skip("fst", "needs two race groups and >= 10 subjects with FST and ground truth");
    } else {
      const std::vector<std::string> pr(present.begin(), present.end());
      // Orientation: the lighter-mean group is coded 1 and FST is reversed, so both taus are positive.
      double sum0 = 0, sum1 = 0, n0 = 0, n1 = 0;
      for (std::size_t i = 0; i < light.size(); ++i) {
        if (race[i] == pr[0]) {
          sum0 += light[i];
          ++n0;
        } else {
          sum1 += light[i];
          ++n1;
        }
      }
      const std::string lighter = sum1 / n1 >= sum0 / n0 ? pr[1] : pr[0];
      std::vector<double> race_ind(light.size());
      std::vector<double> fst_rev(light.size());
      for (std::size_t i = 0; i < light.size(); ++i) {
        race_ind[i] = race[i] == lighter ? 1.0 : 0.0;
        fst_rev[i] = -fst[i];
      }

      // Contingency and per-FST error rate at the overall ground-truth EER threshold.
      std::vector<std::vector<double>> table(6, std::vector<double>(2, 0.0));
      for (std::size_t i = 0; i < light.size(); ++i) {
        table[static_cast<std::size_t>(fst[i]) - 1][race[i] == pr[0] ? 0 : 1] += 1.0;
      }
      std::vector<std::vector<double>> nonempty;
      for (const auto& row : table) {
        if (row[0] + row[1] > 0) nonempty.push_back(row);
      }
      const auto eer_it = eers.find(gt_id);
      {
        std::ofstream f(global.out / "fst_race.csv", std::ios::binary);
        write_csv_row(f, {"fst", "n_" + pr[0], "n_" + pr[1], "error_rate_at_eer_threshold"});
        json arr = json::array();
        for (int k = 1; k <= 6; ++k) {
          const auto& row = table[static_cast<std::size_t>(k) - 1];
          double er = std::numeric_limits<double>::quiet_NaN();
          if (eer_it != eers.end() && row[0] + row[1] > 0) {
            const bool first_above = eer_it->second.a_above;
            double wrong = 0;
            for (std::size_t i = 0; i < light.size(); ++i) {
              if (fst[i] != k) continue;
              const bool above = light[i] > eer_it->second.threshold;
              const bool should = (race[i] == pr[0]) == first_above;
              if (above != should) ++wrong;
            }
            er = wrong / (row[0] + row[1]);
          }
          const std::string name(roman(static_cast<Fst>(k)));
          write_csv_row(f, {name, fx(row[0], 0), fx(row[1], 0), fx(er)});
          arr.push_back({{"fst", name}, {"n_" + pr[0], row[0]}, {"n_" + pr[1], row[1]}, {"error_rate", num_or_null(er)}});
        }
        report["fst_race"] = arr;
      }
      try {
        const auto chi = chi_square_contingency(nonempty);
        report["chi_square"] = {{"statistic", chi.statistic}, {"df", chi.df}, {"p_value", format_p_value(chi.p_value)}};
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDegenerate) throw;
        skip("chi_square", e.what());
      }

      {
        std::ofstream f(global.out / "tau.csv", std::ios::binary);
        write_csv_row(f, {"quantity", "value", "ci_low", "ci_high"});
        const double tau_race = kendall_tau_b(race_ind, light);
        const double tau_fst = kendall_tau_b(fst_rev, light);
        const auto diff = bootstrap_tau_difference(race_ind, fst_rev, light, boot, seed, global.jobs, confidence);
        write_csv_row(f, {"tau_race", fx(tau_race), "NA", "NA"});
        write_csv_row(f, {"tau_fst", fx(tau_fst), "NA", "NA"});
        write_csv_row(f, {"tau_race_minus_tau_fst", fx(diff.delta), fx(diff.ci_low), fx(diff.ci_high)});
        report["tau"] = {{"lighter_group", lighter},
                         {"tau_race", tau_race},
                         {"tau_fst", tau_fst},
                         {"delta", diff.delta},
                         {"ci_low", diff.ci_low},
                         {"ci_high", diff.ci_high},
                         {"replicates", diff.replicates},
                         {"redraws", diff.redraws}};
      }

      {
        const ModelFit m_fst = ols_fit({fst}, light, {"FST"});
        const ModelFit m_race = ols_fit({race_ind}, light, {"race"});
        const ModelFit m_both = ols_fit({fst, race_ind}, light, {"FST", "race"});
        const auto f_race = nested_f_test(m_race, m_both);
        const auto f_fst = nested_f_test(m_fst, m_both);
        std::ofstream f(global.out / "models.csv", std::ios::binary);
        write_csv_row(f, {"model", "r_squared", "aic", "n"});
        json models = json::array();
        for (const auto* m : {&m_fst, &m_race, &m_both}) {
          std::string name = "L_f ~ ";
          for (std::size_t i = 0; i < m->terms.size(); ++i) name += (i ? " + " : "") + m->terms[i];
          write_csv_row(f, {name, fx(m->r_squared), fx(m->aic), std::to_string(m->n)});
          models.push_back({{"model", name}, {"r_squared", m->r_squared}, {"aic", m->aic}, {"n", m->n}});
        }
        std::ofstream ft(global.out / "f_tests.csv", std::ios::binary);
        write_csv_row(ft, {"reduced", "full", "F", "df1", "df2", "p_value"});
        json tests = json::array();
        for (const auto& [reduced, res] : {std::pair{std::string("L_f ~ race"), f_race},
                                           std::pair{std::string("L_f ~ FST"), f_fst}}) {
          write_csv_row(ft, {reduced, "L_f ~ FST + race", fx(res.f), std::to_string(res.df1), std::to_string(res.df2),
                             format_p_value(res.p_value)});
          tests.push_back({{"reduced", reduced}, {"full", "L_f ~ FST + race"}, {"F", res.f}, {"df1", res.df1},
                           {"df2", res.df2}, {"p_value", format_p_value(res.p_value)}});
        }
        report["models"] = models;
        report["f_tests"] = tests;
      }

      // FST distribution by race.
      std::vector<std::string> cats;
      BarSeries s0{pr[0], {}, {}, {}};
      BarSeries s1{pr[1], {}, {}, {}};
      for (int k = 1; k <= 6; ++k) {
        cats.emplace_back(roman(static_cast<Fst>(k)));
        s0.values.push_back(table[static_cast<std::size_t>(k) - 1][0]);
        s1.values.push_back(table[static_cast<std::size_t>(k) - 1][1]);
      }
      write_text(global.out / "fig_fst_by_race.svg",
                 bar_chart({"Self-reported FST by race", "FST", "subjects", st}, cats, {s0, s1}));
    }
  }
  report["skipped"] = skipped;
  write_text(global.out / "report.json", report.dump(2) + "\n");

  // Figures.
  {
    std::vector<std::string> cats;
    BarSeries s{"EER", {}, {}, {}};
    for (const auto& id : ids) {
      if (!eers.count(id)) continue;
      cats.push_back(id);
      s.values.push_back(eers.at(id).eer);
    }
    write_text(global.out / "fig_eer.svg",
               bar_chart({"Equal error rate between race groups", "dataset", "EER", st}, cats, {s}, 0.5));
  }
  {
    std::vector<std::string> cats;
    std::vector<BarSeries> series;
    for (const auto& g : races) series.push_back({g, {}, {}, {}});
    for (const auto& id : ids) {
      cats.push_back(id);
      for (std::size_t i = 0; i < races.size(); ++i) {
        const auto& pg = ranges.at(id).per_group;
        const auto it = pg.find(races[i]);
        const double m = it == pg.end() ? std::numeric_limits<double>::quiet_NaN() : it->second.mean;
        const double sd = it == pg.end() ? 0.0 : it->second.sd;
        series[i].values.push_back(m);
        series[i].error_low.push_back(m - sd);
        series[i].error_high.push_back(m + sd);
      }
    }
    write_text(global.out / "fig_range.svg",
               bar_chart({"Intra-subject range of L_f (mean +/- SD)", "dataset", "range (L*)", st}, cats, series));
  }
  if (!correlations.empty()) {
    std::vector<std::string> cats;
    BarSeries s{"rho", {}, {}, {}};
    for (const auto& id : ids) {
      if (!correlations.count(id)) continue;
      const auto& c = correlations.at(id);
      cats.push_back(id);
      s.values.push_back(c.rho);
      s.error_low.push_back(c.ci_low);
      s.error_high.push_back(c.ci_high);
    }
    write_text(global.out / "fig_correlation.svg",
               bar_chart({"Pearson correlation with ground truth", "dataset", "rho", st}, cats, {s}, 1.0));
  }
  for (const auto& id : {gt_id, hist_id}) {
    if (!tables.count(id)) continue;
    std::vector<HistSeries> series;
    for (const auto& g : races) series.push_back({g, {}});
    for (const auto& r : tables.at(id).rows) {
      for (auto& s : series) {
        if (s.name == race_of[r.subject_id]) s.values.push_back(r.lightness);
      }
    }
    std::optional<double> marker;
    if (eers.count(id)) marker = eers.at(id).threshold;
    write_text(global.out / ("fig_hist_" + id + ".svg"),
               histogram({"L_f distribution: " + id, "L_f", "count", st}, series, 0.0, 100.0, 50, marker));
  }

  std::vector<ManifestInput> inputs{{"subjects", options.subjects}};
  for (const auto& f : files) inputs.push_back({"table", f});
  RunManifest manifest{"analyze", seed, effective(settings, seed), inputs, global.deterministic};
  manifest.write(global.out);
  log << "analyze: " << ids.size() << " tables -> " << global.out.string() << "\n";
  return kOk;
}

// ---- simulate ------------------------------------------------------------------------------

int cmd_simulate(const GlobalOptions& global, const SimulateOptions& options, std::ostream& log) {
  const Settings settings = load_settings("simulate", global);
  const std::uint64_t seed = resolve_seed(global, settings);
  const SimConfig config = sim_config_from(settings, seed, global.jobs);
  const std::string gt_id = settings.text("ground_truth_dataset", kGroundTruthId);
  const std::vector<std::string> only = settings.list("datasets");
  const bool study_mode = options.subjects.has_value() || options.tables.has_value();
  if (study_mode && !(options.subjects && options.tables)) {
    throw Error(ErrorKind::kConfig, "study mode needs both --subjects and --tables");
  }
  const bool render = settings.text("render", "0") == "1" || settings.text("render", "0") == "true";
  const MaskParams mask = mask_from(settings);
  prepare_out(global.out);
  const std::string st = stamp(global, "simulate");

  auto population_tables = [&](const PopulationSpec& spec) {
    const SyntheticStudy study = generate_synthetic_study(spec, seed);
    const auto measurements =
        render ? rendered_measurements(study, spec, seed, mask, global.jobs) : intended_measurements(study);
    auto built = build_tables(study.bundle.datasets(), measurements, study.bundle.subjects());
    return std::make_pair(study.bundle.subjects(), std::move(built.tables));
  };

  std::vector<ManifestInput> inputs;
  if (settings.has("noise_levels")) {
    if (study_mode) throw Error(ErrorKind::kConfig, "noise_levels applies to synthetic populations only");
    const auto levels = settings.reals("noise_levels", {});
    if (levels.size() < 2) throw Error(ErrorKind::kConfig, "noise_levels needs at least two values");
    const std::string noisy = settings.text("noise_dataset", "CE");
    const PopulationSpec base = population_from_settings(settings);
    json sweep = json::array();
    std::ofstream f(global.out / "noise_sweep.csv", std::ios::binary);
    write_csv_row(f, {"noise_scale", "dataset", "term", "selection_freq", "coef_mean", "ci_low", "ci_high"});
    std::vector<double> race_freq;
    std::vector<double> falm_freq;
    std::vector<std::string> cats;
    std::vector<BarSeries> series;
    for (const auto& name : {kTermGender, kTermAge, kTermLightness, kTermRace}) series.push_back({name, {}, {}, {}});
    for (double level : levels) {
      PopulationSpec spec = base;
      spec.noise_scale = level;
      const auto [subjects, tables] = population_tables(spec);
      const auto in = simulation_inputs(subjects, tables, gt_id, {noisy});
      const auto result = run_experiment(in.population, in.estimates, config);
      write_experiment_csv(f, result, fx(level, 4));
      const auto& d = result.datasets.front();
      race_freq.push_back(d.term(kTermRace).selection_frequency);
      falm_freq.push_back(d.term(kTermLightness).selection_frequency);
      cats.push_back(fx(level, 2));
      for (std::size_t i = 0; i < 4; ++i) series[i].values.push_back(d.terms[i].selection_frequency);
      json entry = experiment_json(result);
      entry["noise_scale"] = level;
      sweep.push_back(entry);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < levels.size(); ++i) {
      if (levels[i] > levels[i - 1]) {
        monotone = monotone && race_freq[i] >= race_freq[i - 1] && falm_freq[i] <= falm_freq[i - 1];
      }
    }
    json out{{"config", sim_config_json(config)}, {"noise_dataset", noisy}, {"levels", sweep},
             {"race_nondecreasing_and_falm_nonincreasing", monotone}};
    write_text(global.out / "noise_sweep.json", out.dump(2) + "\n");
    write_text(global.out / "fig_noise_sweep.svg",
               bar_chart({"Selection frequency vs image-noise scale (" + noisy + ")", "noise scale",
                          "selection frequency", st},
                         cats, series, 1.0));
    log << "simulate: noise sweep over " << levels.size() << " levels, monotone=" << (monotone ? "yes" : "no") << "\n";
  } else {
    std::vector<SubjectRecord> subjects;
    std::map<std::string, FalmTable> tables;
    if (study_mode) {
      subjects = read_subjects(*options.subjects);
      const auto files = table_files(*options.tables);
      tables = read_tables(files);
      inputs.push_back({"subjects", *options.subjects});
      for (const auto& file : files) inputs.push_back({"table", file});
    } else {
      std::tie(subjects, tables) = population_tables(population_from_settings(settings));
    }
    const auto in = simulation_inputs(subjects, tables, gt_id, only);
    if (in.estimates.empty()) throw SchemaError("", 0, "dataset_id", "no dataset covers the ground-truth subjects");
    const auto result = run_experiment(in.population, in.estimates, config);
    json out{{"config", sim_config_json(config)}};
    const json body = experiment_json(result);
    for (const auto& [k, v] : body.items()) out[k] = v;
    out["skipped_datasets"] = skipped_json(in.skipped);
    write_text(global.out / "experiment.json", out.dump(2) + "\n");
    std::ofstream f(global.out / "experiment.csv", std::ios::binary);
    write_csv_row(f, {"dataset", "term", "selection_freq", "coef_mean", "ci_low", "ci_high"});
    write_experiment_csv(f, result);
    write_text(global.out / "fig_selection.svg", selection_svg(result, st));
    write_text(global.out / "fig_coefficients.svg", coefficient_svg(result, st));
    for (const auto& [id, why] : in.skipped) log << "simulate: SKIPPED " << id << ": " << why << "\n";
    log << "simulate: " << result.datasets.size() << " datasets, " << config.replicates << " replicates\n";
  }
  RunManifest manifest{"simulate", seed, effective(settings, seed), inputs, global.deterministic};
  manifest.write(global.out);
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::kConfig:
        return kUsage;
      case ErrorKind::kSchema:
      case ErrorKind::kSurveyMapping:
      case ErrorKind::kInputDomain:
      case ErrorKind::kEmptyInput:
        return kData;
      case ErrorKind::kDegenerate:
      case ErrorKind::kSingularDesign:
      case ErrorKind::kNesting:
        return kNumerical;
    }
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kData;
  return kNumerical;
}

}  // namespace falmkit::cli
