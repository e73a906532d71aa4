#include "falmkit/confound_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "falmkit/error.hpp"
#include "falmkit/rng.hpp"
#include "falmkit/stats.hpp"

using namespace falmkit;

namespace {

std::vector<double> normals(std::uint64_t seed, std::size_t n, double sd = 1.0) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = rng.normal(0.0, sd);
  return out;
}

std::vector<double> indicators(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return out;
}

std::vector<SimSubject> population(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SimSubject> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = out[i];
    s.subject_id = "P" + std::to_string(i);
    s.gender = rng.bernoulli(0.5) ? 1.0 : 0.0;
    s.race = rng.bernoulli(0.5) ? 1.0 : 0.0;
    s.age = 20 + 40 * rng.uniform();
    s.ground_truth_lightness = 45 + 13 * s.race + rng.normal(0, 5);
  }
  return out;
}

bool is_local_minimum(std::span<const Candidate> c, std::span<const double> y, const ModelFit& fit) {
  unsigned mask = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (fit.has_term(c[i].name)) mask |= 1u << i;
  }
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (fit_subset(c, y, mask ^ (1u << i)).aic < fit.aic) return false;
  }
  return true;
}

}  // namespace

TEST(ZTransform, Examples) {
  const auto z = z_transform(std::vector<double>{1, 2, 3});
  EXPECT_NEAR(z[0], -1.0, 1e-15);
  EXPECT_NEAR(z[1], 0.0, 1e-15);
  EXPECT_NEAR(z[2], 1.0, 1e-15);
  const auto w = z_transform(normals(4, 200, 7.0));
  EXPECT_NEAR(mean(w), 0.0, 1e-12);
  EXPECT_NEAR(sample_sd(w), 1.0, 1e-12);
  try {
    z_transform(std::vector<double>{3, 3, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerate);
  }
  EXPECT_THROW(z_transform(std::vector<double>{1}), Error);
}

TEST(SimulateScores, NoNoiseGivesIntercept) {
  SimConfig cfg;
  cfg.sigma = 1e-300;
  const std::vector<double> zeros(10, 0.0);
  for (double s : simulate_scores(zeros, zeros, zeros, zeros, cfg, 1)) EXPECT_DOUBLE_EQ(s, 0.8);
  EXPECT_THROW(simulate_scores(zeros, zeros, std::vector<double>(9), zeros, cfg, 1), Error);
}

TEST(SimulateScores, OlsRecoversEffects) {
  const std::size_t n = 20000;
  const auto gender = indicators(1, n);
  const auto age = z_transform(normals(2, n));
  const auto light = z_transform(normals(3, n));
  const std::vector<double> race(n, 0.0);
  SimConfig cfg;
  const auto y = simulate_scores(gender, age, light, race, cfg, 11);
  const ModelFit f = ols_fit({gender, age, light}, y, {"gender", "age", "L_f"});
  const double se = 0.03 / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(f.coefficients[0], 0.8, 6 * se);
  EXPECT_NEAR(f.coefficient("gender"), 0.01, 6 * se);
  EXPECT_NEAR(f.coefficient("age"), 0.01, 4 * se);
  EXPECT_NEAR(f.coefficient("L_f"), 0.01, 4 * se);
  EXPECT_NEAR(std::sqrt(f.rss / static_cast<double>(n - 4)), 0.03, 0.03 * 0.15);
}

TEST(SimulateScores, RaceCoefficientIsNullWhenScoresIgnoreRace) {
  const std::size_t n = 345;
  const auto pop = population(n, 9);
  std::vector<double> g, a, r, t;
  for (const auto& s : pop) {
    g.push_back(s.gender);
    a.push_back(s.age);
    r.push_back(s.race);
    t.push_back(s.ground_truth_lightness);
  }
  const auto az = z_transform(a), tz = z_transform(t);
  const auto y = simulate_scores(g, az, tz, r, SimConfig{}, 5);
  Eigen::MatrixXd x(n, 5);
  for (std::size_t i = 0; i < n; ++i) x.row(static_cast<Eigen::Index>(i)) << 1, g[i], az[i], tz[i], r[i];
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
  const ModelFit f = ols_fit(x, yv, {"gender", "age", "L_f", "race"});
  const double s2 = f.rss / static_cast<double>(n - 5);
  const Eigen::MatrixXd cov = s2 * (x.transpose() * x).inverse();
  EXPECT_LT(std::abs(f.coefficient("race")), 2.0 * std::sqrt(cov(4, 4)));
}

TEST(Stepwise, KeepsTheOnlyRealEffect) {
  std::size_t noise_hits = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const std::size_t n = 200;
    const auto age = normals(seed * 10 + 1, n);
    const auto e = normals(seed * 10 + 2, n, 0.5);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 + 2.0 * age[i] + e[i];
    const Candidate c[3] = {{"gender", indicators(seed * 10 + 3, n)}, {"age", age}, {"junk", normals(seed * 10 + 4, n)}};
    const auto r = stepwise_aic(c, y);
    ASSERT_TRUE(r.fit.has_term("age"));
    EXPECT_NEAR(r.fit.coefficient("age"), 2.0, 0.2);
    noise_hits += r.fit.has_term("gender") + r.fit.has_term("junk");
    EXPECT_TRUE(is_local_minimum(c, y, r.fit));
  }
  EXPECT_LT(noise_hits, 60u);
}

TEST(Stepwise, PureNoiseUsuallyGivesInterceptOnly) {
  int intercept_only = 0;
  const int seeds = 400;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto y = normals(1000 + seed, 100);
    const Candidate c[1] = {{"x", normals(5000 + seed, 100)}};
    if (stepwise_aic(c, y).fit.terms.empty()) ++intercept_only;
  }
  EXPECT_GE(intercept_only, seeds * 8 / 10);
}

TEST(Stepwise, NoiseTermSelectionRateIsNearLikelihoodRatioTail) {
  // AIC keeps a useless term when its chi-square(1) statistic exceeds 2: about 15.7%.
  std::size_t hits = 0, total = 0;
  for (int seed = 0; seed < 400; ++seed) {
    const auto y = normals(2000 + seed, 150);
    std::vector<Candidate> c;
    for (int j = 0; j < 4; ++j) c.push_back({"x" + std::to_string(j), normals(9000 + 4 * seed + j, 150)});
    const auto r = stepwise_aic(c, y);
    hits += r.fit.terms.size();
    total += 4;
  }
  EXPECT_NEAR(static_cast<double>(hits) / static_cast<double>(total), 0.157, 0.04);
}

TEST(Stepwise, ResultIsALocalMinimumFromEitherStart) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const std::size_t n = 80;
    const auto a = normals(seed, n), b = normals(seed + 100, n), d = normals(seed + 200, n);
    const auto g = indicators(seed + 300, n);
    std::vector<double> y(n);
    const auto e = normals(seed + 400, n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 0.3 * a[i] + 0.1 * b[i] + 0.2 * g[i] + e[i];
    const Candidate c[4] = {{"g", g}, {"a", a}, {"b", b}, {"d", d}};
    for (auto start : {StepwiseStart::kFull, StepwiseStart::kInterceptOnly}) {
      const auto r = stepwise_aic(c, y, start);
      EXPECT_TRUE(is_local_minimum(c, y, r.fit));
      double best = INFINITY;
      for (unsigned mask = 0; mask < 16; ++mask) best = std::min(best, fit_subset(c, y, mask).aic);
      EXPECT_GE(r.fit.aic, best - 1e-9);
      // Terms follow candidate order.
      std::vector<std::string> expected;
      for (const auto& cand : c) {
        if (r.fit.has_term(cand.name)) expected.push_back(cand.name);
      }
      EXPECT_EQ(r.fit.terms, expected);
    }
  }
}

TEST(Stepwise, SingularMovesAreSkippedWithWarning) {
  const auto a = normals(1, 50);
  const auto y = normals(2, 50);
  const Candidate c[2] = {{"a", a}, {"a_copy", a}};
  const auto r = stepwise_aic(c, y);
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_LE(r.fit.terms.size(), 1u);
}

TEST(Experiment, DeterministicAndJobIndependent) {
  const auto pop = population(345, 3);
  std::vector<double> gt, noisy;
  Rng rng(8);
  for (const auto& s : pop) {
    gt.push_back(s.ground_truth_lightness);
    noisy.push_back(s.ground_truth_lightness + rng.normal(0, 20));
  }
  const std::vector<DatasetEstimate> ds{{"GroundTruth", gt}, {"Copy", gt}, {"Noisy", noisy}};
  SimConfig cfg;
  cfg.replicates = 60;
  cfg.seed = 42;
  const auto a = run_experiment(pop, ds, cfg);
  cfg.jobs = 6;
  const auto b = run_experiment(pop, ds, cfg);
  ASSERT_EQ(a.datasets.size(), 3u);
  for (std::size_t d = 0; d < 3; ++d) {
    for (std::size_t t = 0; t < 4; ++t) {
      const auto& x = a.datasets[d].terms[t];
      const auto& y = b.datasets[d].terms[t];
      EXPECT_EQ(x.times_selected, y.times_selected);
      if (x.times_selected > 0) {
        EXPECT_EQ(x.coef_mean, y.coef_mean);
        EXPECT_EQ(x.ci_low, y.ci_low);
      }
    }
  }
  // A zero-noise copy of ground truth reproduces the ground-truth arm exactly.
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(a.datasets[0].terms[t].times_selected, a.datasets[1].terms[t].times_selected);
    if (a.datasets[0].terms[t].times_selected > 0) {
      EXPECT_EQ(a.datasets[0].terms[t].coef_mean, a.datasets[1].terms[t].coef_mean);
    }
  }
  EXPECT_GE(a.dataset("GroundTruth").term(kTermLightness).selection_frequency, 0.9);
  EXPECT_GT(a.dataset("Noisy").term(kTermRace).selection_frequency,
            a.dataset("GroundTruth").term(kTermRace).selection_frequency);
  EXPECT_EQ(a.population_size, 345u);
}

TEST(Experiment, RejectsBadInputs) {
  const auto pop = population(50, 1);
  SimConfig cfg;
  cfg.replicates = 2;
  cfg.resample_n = 50;
  try {
    run_experiment(pop, std::vector<DatasetEstimate>{{"short", std::vector<double>(49, 1.0)}}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
  }
  EXPECT_THROW(run_experiment(pop, {}, cfg), Error);
  cfg.sigma = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = SimConfig{};
  cfg.replicates = 0;
  EXPECT_THROW(cfg.validate(), Error);
}
