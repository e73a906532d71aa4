#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "falmkit/ols.hpp"

namespace falmkit {

/// Term names used in the simulation designs.
inline constexpr const char* kTermGender = "gender";
inline constexpr const char* kTermAge = "age";
inline constexpr const char* kTermLightness = "L_f";
inline constexpr const char* kTermRace = "race";

enum class StepwiseStart { kFull, kInterceptOnly };

struct SimConfig {
  double beta0 = 0.8;
  double beta_gender = 0.01;
  double beta_age = 0.01;
  double beta_falm = 0.01;
  double beta_race = 0.0;  // scores do not depend on race unless a scenario sets this
  double sigma = 0.03;
  std::size_t replicates = 1000;
  std::size_t resample_n = 345;
  std::uint64_t seed = 1;
  StepwiseStart start = StepwiseStart::kFull;
  unsigned jobs = 1;

  void validate() const;
};

/// (x - mean) / sd with the sample SD. Throws kDegenerate for constant input, kInputDomain for n < 2.
std::vector<double> z_transform(std::span<const double> values);

/// One subject of the simulated population. Indicators are 0/1 and are never standardised.
struct SimSubject {
  std::string subject_id;
  double gender = 0.0;  // 1 = indicator level
  double age = 0.0;     // years
  double race = 0.0;    // 1 = indicator level
  double ground_truth_lightness = 0.0;
};

/// score = beta0 + b1 gender + b2 age_z + b3 lightness_z (+ b4 race) + N(0, sigma).
/// Continuous covariates must already be z-transformed.
std::vector<double> simulate_scores(std::span<const double> gender, std::span<const double> age_z,
                                    std::span<const double> lightness_z, std::span<const double> race,
                                    const SimConfig& config, std::uint64_t seed);

struct Candidate {
  std::string name;
  std::vector<double> values;
};

struct StepwiseResult {
  ModelFit fit;
  std::vector<std::string> warnings;  // skipped singular moves
  std::size_t steps = 0;
};

/// Bidirectional stepwise search minimising AIC. Each step evaluates every single-term
/// addition and deletion and takes the lowest-AIC move if it beats the current model.
/// The intercept is always kept. Terms in the result follow candidate order.
StepwiseResult stepwise_aic(std::span<const Candidate> candidates, std::span<const double> response,
                            StepwiseStart start = StepwiseStart::kFull);

/// Fits response on the subset of candidates selected by `mask` (bit i = candidate i).
ModelFit fit_subset(std::span<const Candidate> candidates, std::span<const double> response, unsigned mask);

/// Estimated lightness of every population subject under one dataset, aligned with the population.
struct DatasetEstimate {
  std::string dataset_id;
  std::vector<double> lightness;
};

struct TermSummary {
  std::string term;
  double selection_frequency = 0.0;
  std::size_t times_selected = 0;
  double coef_mean = 0.0;  // over replicates that selected the term; NaN if never selected
  double ci_low = 0.0;     // 2.5th percentile of those estimates
  double ci_high = 0.0;    // 97.5th percentile
};

struct DatasetOutcome {
  std::string dataset_id;
  std::vector<TermSummary> terms;  // gender, age, L_f, race
  double intercept_only_frequency = 0.0;
  std::size_t singular_warnings = 0;

  [[nodiscard]] const TermSummary& term(const std::string& name) const;
};

struct ExperimentResult {
  SimConfig config;
  std::size_t population_size = 0;
  std::vector<DatasetOutcome> datasets;

  [[nodiscard]] const DatasetOutcome& dataset(const std::string& id) const;
};

/// Resamples subjects, redraws noise, simulates scores from ground truth and runs
/// stepwise_aic per dataset using that dataset's estimated lightness. Bitwise reproducible
/// for a given seed regardless of config.jobs.
ExperimentResult run_experiment(std::span<const SimSubject> population, std::span<const DatasetEstimate> datasets,
                                const SimConfig& config);

}  // namespace falmkit
