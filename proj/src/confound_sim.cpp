#include "falmkit/confound_sim.hpp"

#include <cmath>
#include <limits>

#include "falmkit/error.hpp"
#include "falmkit/parallel.hpp"
#include "falmkit/rng.hpp"
#include "falmkit/stats.hpp"

namespace falmkit {

void SimConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::kConfig, "sigma must be > 0");
  if (replicates < 1) throw Error(ErrorKind::kConfig, "replicates must be >= 1");
  if (resample_n < 10) throw Error(ErrorKind::kConfig, "resample_n must be >= 10");
  for (double b : {beta0, beta_gender, beta_age, beta_falm, beta_race}) {
    if (!std::isfinite(b)) throw Error(ErrorKind::kConfig, "effect sizes must be finite");
  }
}

std::vector<double> z_transform(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorKind::kInputDomain, "z_transform: need at least 2 values");
  const double m = mean(values);
  const double sd = sample_sd(values);
  if (!(sd > 0.0)) throw Error(ErrorKind::kDegenerate, "z_transform: constant variable");
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - m) / sd);
  return out;
}

std::vector<double> simulate_scores(std::span<const double> gender, std::span<const double> age_z,
                                    std::span<const double> lightness_z, std::span<const double> race,
                                    const SimConfig& config, std::uint64_t seed) {
  const std::size_t n = gender.size();
  if (age_z.size() != n || lightness_z.size() != n || race.size() != n) {
    throw Error(ErrorKind::kSchema, "simulate_scores: every covariate must be present for every subject");
  }
  Rng rng(seed);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = config.beta0 + config.beta_gender * gender[i] + config.beta_age * age_z[i] +
                config.beta_falm * lightness_z[i] + config.beta_race * race[i] + rng.normal(0.0, config.sigma);
  }
  return scores;
}

ModelFit fit_subset(std::span<const Candidate> candidates, std::span<const double> response, unsigned mask) {
  std::vector<std::vector<double>> columns;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (mask & (1u << i)) {
      columns.push_back(candidates[i].values);
      names.push_back(candidates[i].name);
    }
  }
  return ols_fit(columns, response, std::move(names));
}

StepwiseResult stepwise_aic(std::span<const Candidate> candidates, std::span<const double> response,
                            StepwiseStart start) {
  if (candidates.size() > 16) throw Error(ErrorKind::kInputDomain, "stepwise_aic: too many candidates");
  for (const auto& c : candidates) {
    if (c.values.size() != response.size()) {
      throw Error(ErrorKind::kSchema, "stepwise_aic: candidate '" + c.name + "' is not present for every observation");
    }
  }
  StepwiseResult result;
  unsigned mask = start == StepwiseStart::kFull ? (1u << candidates.size()) - 1u : 0u;
  try {
    result.fit = fit_subset(candidates, response, mask);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kSingularDesign) throw;
    result.warnings.push_back("singular start model; starting from intercept only");
    mask = 0;
    result.fit = fit_subset(candidates, response, mask);
  }

  for (;;) {
    unsigned best_mask = mask;
    ModelFit best_fit;
    double best_aic = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const unsigned trial = mask ^ (1u << i);
      try {
        ModelFit f = fit_subset(candidates, response, trial);
        if (f.aic < best_aic) {
          best_aic = f.aic;
          best_mask = trial;
          best_fit = std::move(f);
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kSingularDesign) throw;
        result.warnings.push_back(std::string((mask & (1u << i)) ? "drop " : "add ") + candidates[i].name +
                                  ": singular design, move skipped");
      }
    }
    if (!(best_aic < result.fit.aic)) break;
    mask = best_mask;
    result.fit = std::move(best_fit);
    ++result.steps;
  }
  return result;
}

const TermSummary& DatasetOutcome::term(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.term == name) return t;
  }
  throw Error(ErrorKind::kInputDomain, "no term '" + name + "' in outcome");
}

const DatasetOutcome& ExperimentResult::dataset(const std::string& id) const {
  for (const auto& d : datasets) {
    if (d.dataset_id == id) return d;
  }
  throw Error(ErrorKind::kInputDomain, "no dataset '" + id + "' in experiment result");
}

namespace {

struct ReplicateFit {
  unsigned mask = 0;
  double coef[4] = {};
  std::size_t warnings = 0;
};

}  // namespace

ExperimentResult run_experiment(std::span<const SimSubject> population, std::span<const DatasetEstimate> datasets,
                                const SimConfig& config) {
  config.validate();
  const std::size_t n_pop = population.size();
  if (n_pop < 2) throw Error(ErrorKind::kSchema, "run_experiment: population needs at least 2 subjects");
  if (datasets.empty()) throw Error(ErrorKind::kSchema, "run_experiment: no FALM datasets supplied");
  for (const auto& d : datasets) {
    if (d.lightness.size() != n_pop) {
      throw Error(ErrorKind::kSchema, "run_experiment: dataset " + d.dataset_id + " has " +
                                          std::to_string(d.lightness.size()) + " estimates for " +
                                          std::to_string(n_pop) + " subjects");
    }
    for (double v : d.lightness) {
      if (!std::isfinite(v)) throw Error(ErrorKind::kSchema, "run_experiment: non-finite estimate in " + d.dataset_id);
    }
  }

  static const char* const kTerms[4] = {kTermGender, kTermAge, kTermLightness, kTermRace};
  const std::size_t n_ds = datasets.size();
  const std::size_t m = config.resample_n;
  std::vector<std::vector<ReplicateFit>> fits(config.replicates, std::vector<ReplicateFit>(n_ds));

  parallel_for(config.replicates, config.jobs, [&](std::size_t r) {
    Rng resample_rng = Rng::derive(config.seed, {r, 0});
    std::vector<std::size_t> idx(m);
    for (auto& i : idx) i = resample_rng.uniform_index(n_pop);

    std::vector<double> gender(m), age(m), race(m), truth(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& s = population[idx[i]];
      gender[i] = s.gender;
      age[i] = s.age;
      race[i] = s.race;
      truth[i] = s.ground_truth_lightness;
    }
    const std::vector<double> age_z = z_transform(age);
    const std::vector<double> truth_z = z_transform(truth);
    const std::uint64_t noise_seed = Rng::derive(config.seed, {r, 1}).next_u64();
    const std::vector<double> scores = simulate_scores(gender, age_z, truth_z, race, config, noise_seed);

    for (std::size_t d = 0; d < n_ds; ++d) {
      std::vector<double> est(m);
      for (std::size_t i = 0; i < m; ++i) est[i] = datasets[d].lightness[idx[i]];
      const Candidate candidates[4] = {
          {kTermGender, gender}, {kTermAge, age_z}, {kTermLightness, z_transform(est)}, {kTermRace, race}};
      const StepwiseResult sel = stepwise_aic(candidates, scores, config.start);
      ReplicateFit& out = fits[r][d];
      out.warnings = sel.warnings.size();
      for (unsigned t = 0; t < 4; ++t) {
        if (sel.fit.has_term(kTerms[t])) {
          out.mask |= 1u << t;
          out.coef[t] = sel.fit.coefficient(kTerms[t]);
        }
      }
    }
  });

  ExperimentResult result;
  result.config = config;
  result.population_size = n_pop;
  const auto reps = static_cast<double>(config.replicates);
  for (std::size_t d = 0; d < n_ds; ++d) {
    DatasetOutcome outcome;
    outcome.dataset_id = datasets[d].dataset_id;
    std::size_t intercept_only = 0;
    for (std::size_t r = 0; r < config.replicates; ++r) {
      if (fits[r][d].mask == 0) ++intercept_only;
      outcome.singular_warnings += fits[r][d].warnings;
    }
    outcome.intercept_only_frequency = static_cast<double>(intercept_only) / reps;
    for (unsigned t = 0; t < 4; ++t) {
      TermSummary s;
      s.term = kTerms[t];
      std::vector<double> coefs;
      for (std::size_t r = 0; r < config.replicates; ++r) {
        if (fits[r][d].mask & (1u << t)) coefs.push_back(fits[r][d].coef[t]);
      }
      s.times_selected = coefs.size();
      s.selection_frequency = static_cast<double>(coefs.size()) / reps;
      if (coefs.empty()) {
        s.coef_mean = s.ci_low = s.ci_high = std::numeric_limits<double>::quiet_NaN();
      } else {
        s.coef_mean = mean(coefs);
        s.ci_low = quantile(coefs, 0.025);
        s.ci_high = quantile(std::move(coefs), 0.975);
      }
      outcome.terms.push_back(std::move(s));
    }
    result.datasets.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace falmkit
