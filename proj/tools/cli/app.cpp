#include <CLI11.hpp>
#include <ostream>

#include "cli/commands.hpp"

namespace falmkit::cli {
namespace {

void flag_to_setting(CLI::App* cmd, GlobalOptions& g, const std::string& flag, const std::string& key,
                     const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&g, key](const std::string& v) { g.flag_settings[key] = v; }, help);
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"falmkit: face-area lightness measurement and analysis toolkit", "falmkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "random seed (falls back to config 'seed', then FALMKIT_SEED, then 1)");
  app.add_option("--jobs", g.jobs, "worker threads; outputs do not depend on this")->check(CLI::Range(1u, 1024u));
  app.add_option("--out", g.out, "output directory");
  app.add_flag("--deterministic", g.deterministic, "omit timestamps from manifests and figures");
  app.add_option("--config", g.config, "flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.set_pairs, "override a config key (key=value); repeatable");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic study bundle with rendered images");
  bool no_images = false;
  c_synth->add_flag("--no-images", no_images, "write the CSV files only");
  flag_to_setting(c_synth, g, "--subjects-count", "n_subjects", "number of study subjects");
  flag_to_setting(c_synth, g, "--noise-scale", "noise_scale", "multiplier on every image-noise SD");

  MeasureOptions measure;
  auto* c_measure = app.add_subcommand("measure", "measure face and background lightness of every image");
  c_measure->add_option("--subjects", measure.subjects, "subjects.csv")->required();
  c_measure->add_option("--images", measure.images, "images.csv")->required();
  flag_to_setting(c_measure, g, "--radius-fraction", "radius_fraction", "mask radius as a fraction of min(w, h)");
  flag_to_setting(c_measure, g, "--outlier-k", "outlier_k", "MAD rejection multiplier ('inf' disables)");

  BuildOptions build;
  std::string build_datasets;
  auto* c_build = app.add_subcommand("build-datasets", "build FALM tables for each dataset definition");
  c_build->add_option("--measurements", build.measurements, "measurements.csv from measure")->required();
  c_build->add_option("--subjects", build.subjects, "subjects.csv")->required();
  c_build->add_option("--datasets", build_datasets, "datasets.csv (default: the seven standard datasets)");

  AnalyzeOptions analyze;
  auto* c_analyze = app.add_subcommand("analyze", "EER, range, correlation, FST and model analyses");
  c_analyze->add_option("--subjects", analyze.subjects, "subjects.csv")->required();
  c_analyze->add_option("--tables", analyze.tables, "directory of FALM table CSVs")->required();
  flag_to_setting(c_analyze, g, "--bootstrap", "bootstrap_replicates", "bootstrap replicates for tau difference");

  SimulateOptions simulate;
  std::string sim_subjects;
  std::string sim_tables;
  auto* c_sim = app.add_subcommand("simulate", "run the score simulation and stepwise model selection");
  c_sim->add_option("--subjects", sim_subjects, "subjects.csv (study mode)");
  c_sim->add_option("--tables", sim_tables, "directory of FALM tables (study mode)");
  flag_to_setting(c_sim, g, "--replicates", "replicates", "bootstrap replicates");
  flag_to_setting(c_sim, g, "--noise-levels", "noise_levels", "comma-separated noise scales for a sweep");
  flag_to_setting(c_sim, g, "--datasets", "datasets", "comma-separated dataset ids to include");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (app.count("--seed") > 0) g.seed = seed;
  synth.write_images = !no_images;
  if (!build_datasets.empty()) build.datasets = build_datasets;
  if (!sim_subjects.empty()) simulate.subjects = sim_subjects;
  if (!sim_tables.empty()) simulate.tables = sim_tables;

  try {
    if (c_synth->parsed()) return cmd_synth(g, synth, err);
    if (c_measure->parsed()) return cmd_measure(g, measure, err);
    if (c_build->parsed()) return cmd_build_datasets(g, build, err);
    if (c_analyze->parsed()) return cmd_analyze(g, analyze, err);
    if (c_sim->parsed()) return cmd_simulate(g, simulate, err);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "falmkit: error: " << e.what() << "\n";
    if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
      for (const auto& issue : v->issues()) err << "  " << issue.describe() << "\n";
    }
    return code;
  }
  return kUsage;
}

}  // namespace falmkit::cli
