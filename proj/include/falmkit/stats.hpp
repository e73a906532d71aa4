#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace falmkit {

struct EerResult {
  double eer = 0.0;        // in [0, 0.5]
  double threshold = 0.0;  // value at the error-curve crossing
  bool a_above = true;     // orientation: group a scored as the one above the threshold
};

/// Equal error rate of a single-threshold classifier separating two groups. Thresholds sweep
/// the midpoints between adjacent distinct pooled values (plus one beyond each end); the
/// crossing of the two misclassification curves is linearly interpolated. Both orientations
/// are tried and the smaller EER is returned.
EerResult eer(std::span<const double> group_a, std::span<const double> group_b);

/// Misclassification rate of a group at a fixed threshold, given which side it should fall on.
double error_rate_at(std::span<const double> values, double threshold, bool should_be_above);

struct RangeSummary {
  std::size_t n_subjects = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample SD; 0 for a single subject
};

/// max - min of one subject's values. Throws kEmptyInput on an empty set.
double subject_range(std::span<const double> values);
RangeSummary summarize_ranges(std::span<const double> ranges);

/// Per-subject ranges (keyed by subject id) and their summary per group label.
struct IntraSubjectRange {
  std::map<std::string, double> per_subject;
  std::map<std::string, RangeSummary> per_group;
};
IntraSubjectRange intra_subject_range(const std::map<std::string, std::vector<double>>& values_by_subject,
                                      const std::map<std::string, std::string>& group_of_subject);

struct CorrelationResult {
  double rho = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

/// Sample Pearson correlation with a Fisher-z confidence interval.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y, double confidence = 0.95);

/// Kendall tau-b in O(n log n). Throws kDegenerate when either variable is entirely tied.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

struct TauDifference {
  double delta = 0.0;  // tau(x1, y) - tau(x2, y) on the full sample
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t replicates = 0;
  std::size_t redraws = 0;  // degenerate (all-tied) resamples that were redrawn
};

/// Paired bootstrap of tau(x1, y) - tau(x2, y) with a percentile confidence interval.
/// Replicate r draws from Rng::derive(seed, {r, attempt}); the result is independent of `jobs`.
TauDifference bootstrap_tau_difference(std::span<const double> x1, std::span<const double> x2,
                                       std::span<const double> y, std::size_t replicates, std::uint64_t seed,
                                       unsigned jobs = 1, double confidence = 0.95);

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

/// Pearson chi-square test of independence (no continuity correction).
/// Throws kDegenerate if any expected count is zero.
ChiSquareResult chi_square_contingency(const std::vector<std::vector<double>>& table);

/// Linear-interpolation sample quantile (Hyndman-Fan type 7), q in [0, 1].
double quantile(std::vector<double> values, double q);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> values);

/// p-values below 1e-15 render as "<1e-15".
std::string format_p_value(double p);

}  // namespace falmkit
