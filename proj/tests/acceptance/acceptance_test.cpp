// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any criterion fails.
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>
#include <unistd.h>

#include "cli/commands.hpp"
#include "falmkit/colorimetry.hpp"
#include "falmkit/csv.hpp"
#include "falmkit/face_region.hpp"
#include "falmkit/falm.hpp"
#include "falmkit/ols.hpp"
#include "falmkit/stats.hpp"
#include "falmkit/synthetic.hpp"

namespace fs = std::filesystem;
using namespace falmkit;

namespace {

struct Check {
  bool ok = true;
  std::vector<std::string> notes;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes.push_back("failed: " + what);
    }
  }
  void info(const std::string& what) { notes.push_back(what); }
};

std::string num(double v, int d = 4) { return format_fixed(v, d); }

fs::path fixture(const std::string& name) { return fs::path(FALMKIT_FIXTURE_DIR) / name; }

std::vector<double> column(const fs::path& p, const std::string& name) {
  const CsvTable t = read_csv(p);
  const auto c = t.column(name);
  std::vector<double> out;
  for (const auto& r : t.rows()) out.push_back(*parse_real(r.fields[c]));
  return out;
}

int run_cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "falmkit");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, log;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, log);
  if (err) *err = log.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// dataset -> term -> selection frequency / coefficient mean, from experiment.csv.
struct Selection {
  std::map<std::string, std::map<std::string, double>> freq, coef;
};

Selection read_selection(const fs::path& csv, const std::string& prefix_column = "") {
  const CsvTable t = read_csv(csv);
  Selection s;
  const auto cd = t.column("dataset"), ct = t.column("term"), cf = t.column("selection_freq"),
             cc = t.column("coef_mean");
  const auto cp = prefix_column.empty() ? std::optional<std::size_t>() : t.find_column(prefix_column);
  for (const auto& r : t.rows()) {
    const std::string key = cp ? r.fields[*cp] : r.fields[cd];
    s.freq[key][r.fields[ct]] = *parse_real(r.fields[cf]);
    const auto c = parse_real(r.fields[cc]);
    s.coef[key][r.fields[ct]] = c ? *c : NAN;
  }
  return s;
}

// ---- criteria -----------------------------------------------------------------------------

struct LabCase {
  double r, g, b, L;
};

// 50-digit oracle values (tests/oracles/colorimetry_oracle.py).
const LabCase kLab[] = {
    {119, 119, 119, 50.034438792538208},   {127.5, 127.5, 127.5, 53.388964741114306},
    {255, 0, 0, 53.240788867616096},       {0, 255, 0, 87.734720190924362},
    {0, 0, 255, 32.297009439844491},       {1, 1, 1, 0.27417480006565176},
    {10, 10, 10, 2.7417480006565176},      {50, 60, 70, 24.802224742153085},
    {200, 150, 120, 66.097832860512044},   {224, 172, 138, 74.311227579993161},
    {141, 85, 36, 41.671105020863357},     {255, 219, 172, 89.348222106451577},
    {92, 51, 23, 25.878485350390017},      {198, 134, 66, 61.178613099907865},
    {60, 46, 40, 20.31417904862698},       {128, 128, 128, 53.585013452169023},
    {245, 245, 220, 95.949084826738935},   {33, 200, 97, 71.208815348992338},
    {180, 90, 200, 53.15371230443702},     {3, 7, 11, 1.765644255481595},
};

void colorimetry(Check& c) {
  c.expect(std::abs(srgb_to_lab({255, 255, 255}).L - 100.0) <= 1e-3, "white -> L=100");
  c.expect(std::abs(srgb_to_lab({0, 0, 0}).L) <= 1e-12, "black -> L=0");
  double worst = 0;
  for (const auto& k : kLab) worst = std::max(worst, std::abs(srgb_to_lab({k.r, k.g, k.b}).L - k.L));
  c.expect(worst <= 0.01, "20 oracle pairs within dL 0.01");
  c.info("20 pairs, max dL " + format_fixed(worst * 1e12, 3) + "e-12");
}

void formulas(Check& c) {
  // Unbalanced images over three devices.
  std::vector<ImageMeasurement> m;
  Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    const std::string dev = "d" + std::to_string(rng.uniform_index(3));
    m.push_back({"I" + std::to_string(i), "S" + std::to_string(i), dev, "2019-05-06", "lab",
                 ImageSource::kAcquisition, 30 + 40 * rng.uniform() + (dev == "d1" ? 7.0 : 0.0), std::nullopt, 0});
  }
  std::vector<SubjectRecord> subjects;
  for (int i = 0; i < 300; ++i) subjects.push_back({"S" + std::to_string(i), "B", "F", 30, {}, {}});
  const DatasetSpec* ced = nullptr;
  for (const auto& d : standard_datasets()) {
    if (d.dataset_id == "CED") ced = &d;
  }
  const FalmTable t = build_falm_table(*ced, m, subjects);
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : t.rows) {
    acc[r.device_id].first += r.lightness;
    acc[r.device_id].second += 1;
  }
  double worst = 0;
  for (const auto& [d, sn] : acc) worst = std::max(worst, std::abs(sn.first / sn.second - t.global->mu_face));
  c.expect(worst <= 1e-9, "per-device means equal mu_f");

  double shift_err = 0;
  const DeviceStats dev{"d", 48, 52, 10};
  for (int i = 0; i < 1000; ++i) {
    const double lf = 20 + 60 * rng.uniform(), lb = 20 + 60 * rng.uniform(), s = -30 + 60 * rng.uniform();
    shift_err = std::max(shift_err, std::abs(background_correct(lf + s, lb + s, dev) - background_correct(lf, lb, dev)));
  }
  c.expect(shift_err <= 1e-9, "background_correct invariant to shared shifts");
  c.expect(colormeter_falm({30, 26}) == 28.0, "colormeter_falm(30, 26) = 28");
  c.info("device-mean error " + format_fixed(worst * 1e12, 3) + "e-12");
}

void round_trip(Check& c) {
  PopulationSpec spec;
  spec.noise_scale = 0.0;
  spec.pixel_noise = 0.0;
  const SyntheticStudy study = generate_synthetic_study(spec, 1);
  const auto measured = rendered_measurements(study, spec, 1, {}, 4);
  std::map<std::string, double> truth;
  for (std::size_t i = 0; i < study.bundle.subjects().size(); ++i) {
    truth[study.bundle.subjects()[i].subject_id] = std::clamp(study.true_lightness[i], 0.0, 100.0);
  }
  std::size_t camera = 0, within = 0;
  double worst = 0;
  for (const auto& m : measured) {
    if (m.source != ImageSource::kAcquisition && m.source != ImageSource::kHistoric) continue;
    ++camera;
    const double e = std::abs(m.face_lightness - truth.at(m.subject_id));
    worst = std::max(worst, e);
    within += e <= 0.5;
  }
  c.expect(camera > 0 && within == camera, "zero-noise images recover truth within 0.5");
  c.info(std::to_string(within) + "/" + std::to_string(camera) + " images, max err " + num(worst, 3));

  // Two devices offset by +5 and -5, rendered with dither and measured.
  std::vector<ImageMeasurement> m;
  std::vector<SubjectRecord> subjects;
  std::vector<double> truths;
  const int n = 40, size = 128;
  Rng pick(17);
  for (int s = 0; s < n; ++s) {
    truths.push_back(25 + 50 * pick.uniform());
    subjects.push_back({"S" + std::to_string(s), "B", "F", 30, {}, {}});
    for (int d = 0; d < 2; ++d) {
      PatchSpec p;
      p.size = size;
      p.face = {size / 4, size / 4, size / 2, size / 2};
      p.face_lightness = truths.back() + (d == 0 ? 5.0 : -5.0);
      p.pixel_noise = 1.5;
      p.specular_fraction = 0.03;
      Rng rng = Rng::derive(99, {static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(d)});
      const Image img = render_patch(p, rng);
      m.push_back({"I" + std::to_string(s) + "_" + std::to_string(d), subjects.back().subject_id,
                   d == 0 ? "plus" : "minus", "2019-05-06", "lab", ImageSource::kAcquisition,
                   image_falm(img, p.face, {}), std::nullopt, 0});
    }
  }
  const DatasetSpec* ced = nullptr;
  for (const auto& d : standard_datasets()) {
    if (d.dataset_id == "CED") ced = &d;
  }
  const FalmTable t = build_falm_table(*ced, m, subjects);
  double worst_ced = 0;
  for (const auto& r : t.rows) {
    worst_ced = std::max(worst_ced, std::abs(r.lightness - truths[std::stoul(r.subject_id.substr(1))]));
  }
  c.expect(worst_ced < 0.1, "two-device +-5 offsets removed to < 0.1");
  c.info("CED max err " + num(worst_ced, 3));
}

void statistics(Check& c) {
  // EER against the exhaustive sweep oracle.
  const CsvTable g = read_csv(fixture("eer_groups.csv"));
  std::vector<double> a, b;
  for (const auto& r : g.rows()) (r.fields[0] == "a" ? a : b).push_back(*parse_real(r.fields[1]));
  const EerResult e = eer(a, b);
  c.expect(std::abs(e.eer - 0.11) <= 1e-9 && std::abs(e.threshold - 51.150000000000006) <= 1e-9, "EER vs sweep");
  const std::vector<double> a70(a.begin(), a.begin() + 70);
  const EerResult e70 = eer(a70, b);
  c.expect(std::abs(e70.eer - 0.12) <= 1e-9 && std::abs(e70.threshold - 51.309999999999995) <= 1e-9,
           "EER vs sweep (unbalanced)");

  // Kendall tau-b against pair enumeration.
  const auto x = column(fixture("kendall_ties.csv"), "x");
  const auto y = column(fixture("kendall_ties.csv"), "y");
  double conc = 0, disc = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double s = (x[i] - x[j]) * (y[i] - y[j]);
      if (s > 0) ++conc;
      else if (s < 0) ++disc;
      else if (x[i] == x[j] && y[i] != y[j]) ++tx;
      else if (y[i] == y[j] && x[i] != x[j]) ++ty;
    }
  }
  const double tau_pairs = (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
  const double tau = kendall_tau_b(x, y);
  c.expect(x.size() == 30 && std::abs(tau - tau_pairs) <= 1e-12, "tau-b vs pair enumeration");

  // OLS against the normal equations.
  const fs::path p = fixture("ols_100x3.csv");
  const auto x1 = column(p, "x1"), x2 = column(p, "x2"), x3 = column(p, "x3"), yy = column(p, "y");
  const ModelFit fit = ols_fit({x1, x2, x3}, yy, {"x1", "x2", "x3"});
  Eigen::MatrixXd X(100, 4);
  Eigen::VectorXd Y(100);
  for (int i = 0; i < 100; ++i) {
    X.row(i) << 1, x1[i], x2[i], x3[i];
    Y(i) = yy[i];
  }
  const Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  double worst = 0;
  for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(beta(i) - fit.coefficients[i]));
  c.expect(worst <= 1e-8, "OLS vs normal equations");

  const auto chi = chi_square_contingency({{1, 7}, {2, 22}, {6, 36}, {14, 22}, {30, 10}, {47, 3}});
  c.expect(chi.df == 5, "6x2 chi-square has df 5");
  c.info("EER " + num(e.eer, 2) + ", tau " + num(tau, 6) + ", OLS max diff " + format_fixed(worst * 1e12, 3) +
         "e-12, chi2 df " + std::to_string(chi.df));
}

void reproduction(Check& c, const fs::path& work) {
  const fs::path out = work / "criterion5";
  std::string log;
  const int code = run_cli({"--seed", "1", "--deterministic", "--jobs", "8", "--out", out.string(), "--set",
                            "render=1", "simulate", "--replicates", "1000"},
                           &log);
  c.expect(code == 0, "simulate exits 0");
  if (code != 0) {
    c.info(log);
    return;
  }
  const Selection s = read_selection(out / "experiment.csv");
  const double gt_l = s.freq.at("GroundTruth").at("L_f"), gt_r = s.freq.at("GroundTruth").at("race");
  const double ce_l = s.freq.at("CE").at("L_f"), ce_r = s.freq.at("CE").at("race");
  const double ce_coef = s.coef.at("CE").at("L_f"), gt_coef = s.coef.at("GroundTruth").at("L_f");
  c.expect(gt_l >= 0.9, "GroundTruth selects L_f >= 90%");
  c.expect(gt_r <= 0.3, "GroundTruth selects race <= 30%");
  c.expect(ce_r >= 0.9, "CE selects race >= 90%");
  c.expect(ce_l <= 0.4, "CE selects L_f <= 40%");
  c.expect(std::isnan(ce_coef) || ce_coef <= 0.005, "CE mean L_f coefficient <= 0.005");
  c.expect(std::abs(gt_coef - 0.01) <= 0.002, "GroundTruth L_f coefficient 0.01 +- 0.002");

  // Calibration check on the same population: uncontrolled intra-subject range.
  const PopulationSpec spec;
  const SyntheticStudy study = generate_synthetic_study(spec, 1);
  const auto built = cli::build_tables(study.bundle.datasets(), intended_measurements(study), study.bundle.subjects());
  std::map<std::string, std::string> race;
  for (const auto& sub : study.bundle.subjects()) race[sub.subject_id] = sub.race;
  const auto range = intra_subject_range(built.tables.at("CE").values_by_subject(), race);
  std::vector<double> ranges;
  for (const auto& [id, r] : range.per_subject) ranges.push_back(r);
  c.info("GT L_f " + num(gt_l, 3) + " race " + num(gt_r, 3) + " coef " + num(gt_coef, 4) + "; CE L_f " + num(ce_l, 3) +
         " race " + num(ce_r, 3) + " coef " + num(ce_coef, 4) + "; CE mean range " + num(mean(ranges), 1));
}

void monotonicity(Check& c, const fs::path& work) {
  const fs::path out = work / "criterion6";
  const int code = run_cli({"--seed", "1", "--deterministic", "--jobs", "8", "--out", out.string(), "simulate",
                            "--replicates", "200", "--noise-levels", "0.1,0.3,1.0"});
  c.expect(code == 0, "noise sweep exits 0");
  if (code != 0) return;
  const Selection s = read_selection(out / "noise_sweep.csv", "noise_scale");
  std::vector<double> race, falm;
  std::string trace;
  for (const char* level : {"0.1000", "0.3000", "1.0000"}) {
    race.push_back(s.freq.at(level).at("race"));
    falm.push_back(s.freq.at(level).at("L_f"));
    trace += std::string(trace.empty() ? "" : ", ") + level + ": race " + num(race.back(), 3) + " L_f " +
             num(falm.back(), 3);
  }
  c.expect(race[0] <= race[1] && race[1] <= race[2], "race selection non-decreasing");
  c.expect(falm[0] >= falm[1] && falm[1] >= falm[2], "L_f selection non-increasing");
  c.info(trace);
}

bool same_outputs(const fs::path& a, const fs::path& b, Check& c) {
  std::size_t n = 0;
  bool same = true;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto ext = e.path().extension();
    if (ext != ".csv" && ext != ".json") continue;
    ++n;
    if (!fs::exists(b / e.path().filename()) || slurp(e.path()) != slurp(b / e.path().filename())) {
      same = false;
      c.info("differs: " + e.path().filename().string());
    }
  }
  return same && n > 0;
}

void determinism(Check& c, const fs::path& work) {
  const fs::path bundle = work / "criterion7_bundle";
  bool ok = run_cli({"--seed", "7", "--deterministic", "--out", (bundle / "synth").string(), "--set", "n_subjects=120",
                     "--set", "meds_subjects=10", "synth"}) == 0;
  ok = ok && run_cli({"--out", (bundle / "meas").string(), "--jobs", "8", "measure", "--subjects",
                      (bundle / "synth/subjects.csv").string(), "--images", (bundle / "synth/images.csv").string()}) == 0;
  ok = ok && run_cli({"--out", (bundle / "built").string(), "build-datasets", "--measurements",
                      (bundle / "meas/measurements.csv").string(), "--subjects",
                      (bundle / "synth/subjects.csv").string()}) == 0;
  c.expect(ok, "bundle preparation");
  if (!ok) return;
  const std::string subjects = (bundle / "synth/subjects.csv").string();
  const std::string tables = (bundle / "built/tables").string();

  auto analyze = [&](const std::string& tag, const std::string& jobs) {
    const fs::path out = work / ("c7_analyze_" + tag);
    const int code = run_cli({"--seed", "11", "--deterministic", "--jobs", jobs, "--out", out.string(), "analyze",
                              "--subjects", subjects, "--tables", tables, "--bootstrap", "1000"});
    c.expect(code == 0, "analyze " + tag + " exits 0");
    return out;
  };
  auto simulate = [&](const std::string& tag, const std::string& jobs) {
    const fs::path out = work / ("c7_simulate_" + tag);
    const int code = run_cli({"--seed", "11", "--deterministic", "--jobs", jobs, "--out", out.string(), "simulate",
                              "--replicates", "200"});
    c.expect(code == 0, "simulate " + tag + " exits 0");
    return out;
  };
  auto study_sim = [&](const std::string& tag, const std::string& jobs) {
    const fs::path out = work / ("c7_study_" + tag);
    const int code = run_cli({"--seed", "11", "--deterministic", "--jobs", jobs, "--out", out.string(), "simulate",
                              "--subjects", subjects, "--tables", tables, "--replicates", "200"});
    c.expect(code == 0, "study simulate " + tag + " exits 0");
    return out;
  };
  const fs::path a1 = analyze("run1", "1"), a2 = analyze("run2", "1"), a8 = analyze("jobs8", "8");
  c.expect(same_outputs(a1, a2, c), "analyze run 1 == run 2");
  c.expect(same_outputs(a1, a8, c), "analyze jobs 1 == jobs 8");
  const fs::path s1 = simulate("run1", "1"), s2 = simulate("run2", "1"), s8 = simulate("jobs8", "8");
  c.expect(same_outputs(s1, s2, c), "simulate run 1 == run 2");
  c.expect(same_outputs(s1, s8, c), "simulate jobs 1 == jobs 8");
  const fs::path t1 = study_sim("run1", "1"), t8 = study_sim("jobs8", "8");
  c.expect(same_outputs(t1, t8, c), "study-mode simulate jobs 1 == jobs 8");
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / ("falmkit_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);

  struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<void(Check&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "colorimetry exactness", 1.0, colorimetry},
      {2, "lightness formulas", 1.0, formulas},
      {3, "pipeline round-trip", 30.0, round_trip},
      {4, "statistics vs oracles", 10.0, statistics},
      {5, "confound experiment reproduction", 300.0, [&](Check& c) { reproduction(c, work); }},
      {6, "noise monotonicity", 180.0, [&](Check& c) { monotonicity(c, work); }},
      {7, "determinism", 600.0, [&](Check& c) { determinism(c, work); }},
  };

  int failed = 0;
  for (const auto& k : criteria) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      k.run(c);
    } catch (const std::exception& e) {
      c.ok = false;
      c.notes.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > k.limit_s) c.expect(false, "runtime " + num(secs, 2) + " s over " + num(k.limit_s, 0) + " s");
    std::printf("%s criterion %d: %s (%.2f s)\n", c.ok ? "PASS" : "FAIL", k.id, k.name.c_str(), secs);
    for (const auto& n : c.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failed += c.ok ? 0 : 1;
  }
  fs::remove_all(work);
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
