#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "falmkit/confound_sim.hpp"
#include "falmkit/falm.hpp"
#include "falmkit/synthetic.hpp"

namespace falmkit::cli {

namespace fs = std::filesystem;

/// Process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  fs::path out = "falmkit_out";
  bool deterministic = false;
  std::optional<fs::path> config;
  std::vector<std::string> set_pairs;            // --set key=value
  std::map<std::string, std::string> flag_settings;  // dedicated flags, applied last
};

struct SynthOptions {
  bool write_images = true;
};

struct MeasureOptions {
  fs::path subjects;
  fs::path images;
};

struct BuildOptions {
  fs::path measurements;
  fs::path subjects;
  std::optional<fs::path> datasets;
};

struct AnalyzeOptions {
  fs::path subjects;
  fs::path tables;  // directory of FALM table CSVs
};

struct SimulateOptions {
  std::optional<fs::path> subjects;  // with `tables`: study mode; otherwise a synthetic population
  std::optional<fs::path> tables;
};

int cmd_synth(const GlobalOptions& global, const SynthOptions& options, std::ostream& log);
int cmd_measure(const GlobalOptions& global, const MeasureOptions& options, std::ostream& log);
int cmd_build_datasets(const GlobalOptions& global, const BuildOptions& options, std::ostream& log);
int cmd_analyze(const GlobalOptions& global, const AnalyzeOptions& options, std::ostream& log);
int cmd_simulate(const GlobalOptions& global, const SimulateOptions& options, std::ostream& log);

/// Maps an exception thrown by a command to an exit code.
int exit_code_for(const std::exception& e);

/// Argument parsing and dispatch; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

// Building blocks shared with tests.

struct BuiltTables {
  std::map<std::string, FalmTable> tables;
  std::vector<std::pair<std::string, std::string>> skipped;  // dataset id, reason
};

/// Builds every dataset that selects at least one measurement; datasets selecting none are skipped.
BuiltTables build_tables(const std::vector<DatasetSpec>& datasets, const std::vector<ImageMeasurement>& measurements,
                         const std::vector<SubjectRecord>& subjects);

/// Population for the simulation: subjects present in the ground-truth table. Gender and race
/// indicators are 1 for the second of the (at most two) sorted labels.
struct SimInputs {
  std::vector<SimSubject> population;
  std::vector<DatasetEstimate> estimates;
  std::vector<std::pair<std::string, std::string>> skipped;
};
SimInputs simulation_inputs(const std::vector<SubjectRecord>& subjects, const std::map<std::string, FalmTable>& tables,
                            const std::string& ground_truth_id, const std::vector<std::string>& only = {});

/// Applies population keys from settings onto a spec.
class Settings;
PopulationSpec population_from_settings(const Settings& settings);

}  // namespace falmkit::cli
