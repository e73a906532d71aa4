#include "falmkit/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "falmkit/error.hpp"
#include "falmkit/parallel.hpp"
#include "falmkit/rng.hpp"

namespace falmkit {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorKind::kInputDomain, std::string(what) + ": non-finite value");
  }
}

struct Curve {
  std::vector<double> thresholds;
  std::vector<double> err_a;
  std::vector<double> err_b;
};

// Error curves for the orientation "a should be above the threshold".
Curve error_curves(const std::vector<double>& a_sorted, const std::vector<double>& b_sorted) {
  std::vector<double> pooled(a_sorted);
  pooled.insert(pooled.end(), b_sorted.begin(), b_sorted.end());
  std::sort(pooled.begin(), pooled.end());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

  Curve c;
  c.thresholds.push_back(pooled.front() - 1.0);
  for (std::size_t i = 0; i + 1 < pooled.size(); ++i) c.thresholds.push_back(0.5 * (pooled[i] + pooled[i + 1]));
  c.thresholds.push_back(pooled.back() + 1.0);

  const auto na = static_cast<double>(a_sorted.size());
  const auto nb = static_cast<double>(b_sorted.size());
  for (double t : c.thresholds) {
    const auto a_at_or_below = std::upper_bound(a_sorted.begin(), a_sorted.end(), t) - a_sorted.begin();
    const auto b_at_or_below = std::upper_bound(b_sorted.begin(), b_sorted.end(), t) - b_sorted.begin();
    c.err_a.push_back(static_cast<double>(a_at_or_below) / na);
    c.err_b.push_back((nb - static_cast<double>(b_at_or_below)) / nb);
  }
  return c;
}

EerResult crossing(const Curve& c) {
  const std::size_t m = c.thresholds.size();
  std::size_t j = 0;
  while (j < m && c.err_a[j] - c.err_b[j] < 0.0) ++j;
  // The last threshold always has err_a = 1, err_b = 0, so j < m.
  const double d = c.err_a[j] - c.err_b[j];
  if (d == 0.0) {
    std::size_t last = j;
    while (last + 1 < m && c.err_a[last + 1] - c.err_b[last + 1] == 0.0) ++last;
    return {c.err_a[j], 0.5 * (c.thresholds[j] + c.thresholds[last]), true};
  }
  const double d_prev = c.err_a[j - 1] - c.err_b[j - 1];
  const double alpha = -d_prev / (d - d_prev);
  const double rate = c.err_a[j - 1] + alpha * (c.err_a[j] - c.err_a[j - 1]);
  const double t = c.thresholds[j - 1] + alpha * (c.thresholds[j] - c.thresholds[j - 1]);
  return {rate, t, true};
}

}  // namespace

EerResult eer(std::span<const double> group_a, std::span<const double> group_b) {
  if (group_a.empty() || group_b.empty()) throw Error(ErrorKind::kEmptyInput, "eer: both groups must be non-empty");
  require_finite(group_a, "eer");
  require_finite(group_b, "eer");
  std::vector<double> a(group_a.begin(), group_a.end());
  std::vector<double> b(group_b.begin(), group_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  EerResult a_up = crossing(error_curves(a, b));
  EerResult b_up = crossing(error_curves(b, a));
  b_up.a_above = false;
  return b_up.eer < a_up.eer ? b_up : a_up;
}

double error_rate_at(std::span<const double> values, double threshold, bool should_be_above) {
  if (values.empty()) throw Error(ErrorKind::kEmptyInput, "error_rate_at: empty group");
  const auto wrong = std::count_if(values.begin(), values.end(), [&](double v) {
    return should_be_above ? v <= threshold : v > threshold;
  });
  return static_cast<double>(wrong) / static_cast<double>(values.size());
}

double subject_range(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kEmptyInput, "subject_range: no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kEmptyInput, "mean of empty set");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

RangeSummary summarize_ranges(std::span<const double> ranges) {
  if (ranges.empty()) return {};
  return {ranges.size(), mean(ranges), sample_sd(ranges)};
}

IntraSubjectRange intra_subject_range(const std::map<std::string, std::vector<double>>& values_by_subject,
                                      const std::map<std::string, std::string>& group_of_subject) {
  IntraSubjectRange out;
  std::map<std::string, std::vector<double>> by_group;
  for (const auto& [subject, values] : values_by_subject) {
    const double r = subject_range(values);
    out.per_subject[subject] = r;
    const auto g = group_of_subject.find(subject);
    by_group[g == group_of_subject.end() ? std::string() : g->second].push_back(r);
  }
  for (const auto& [group, ranges] : by_group) out.per_group[group] = summarize_ranges(ranges);
  return out;
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y, double confidence) {
  if (x.size() != y.size()) throw Error(ErrorKind::kInputDomain, "pearson: length mismatch");
  if (x.size() < 3) throw Error(ErrorKind::kInputDomain, "pearson: need at least 3 observations");
  require_finite(x, "pearson");
  require_finite(y, "pearson");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::kDegenerate, "pearson: constant input");
  const double rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);

  CorrelationResult out{rho, -1.0, 1.0, x.size()};
  if (x.size() > 3) {
    const double z = std::atanh(rho);
    const double se = 1.0 / std::sqrt(static_cast<double>(x.size()) - 3.0);
    const double crit = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * confidence);
    out.ci_low = std::tanh(z - crit * se);
    out.ci_high = std::tanh(z + crit * se);
    if (std::abs(rho) == 1.0) out.ci_low = out.ci_high = rho;
  }
  return out;
}

namespace {

// Counts inversions while merge-sorting v in place.
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

// Sum of t(t-1)/2 over runs of equal values in a sorted sequence.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq&& equal_to_previous) {
  std::int64_t pairs = 0;
  std::int64_t run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal_to_previous(i)) {
      ++run;
    } else {
      pairs += run * (run - 1) / 2;
      run = 1;
    }
  }
  return pairs + run * (run - 1) / 2;
}

}  // namespace

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::kInputDomain, "kendall_tau_b: length mismatch");
  if (x.size() < 2) throw Error(ErrorKind::kInputDomain, "kendall_tau_b: need at least 2 observations");
  require_finite(x, "kendall_tau_b");
  require_finite(y, "kendall_tau_b");
  const std::size_t n = x.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return x[i] < x[j] || (x[i] == x[j] && y[i] < y[j]);
  });

  const std::int64_t x_ties = tied_pairs(n, [&](std::size_t i) { return x[order[i]] == x[order[i - 1]]; });
  const std::int64_t joint_ties = tied_pairs(n, [&](std::size_t i) {
    return x[order[i]] == x[order[i - 1]] && y[order[i]] == y[order[i - 1]];
  });

  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  std::vector<double> scratch(n);
  const std::int64_t discordant = count_inversions(ys, scratch, 0, n);
  const std::int64_t y_ties = tied_pairs(n, [&](std::size_t i) { return ys[i] == ys[i - 1]; });

  const auto total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  if (x_ties == total || y_ties == total) {
    throw Error(ErrorKind::kDegenerate, "kendall_tau_b: a variable is constant (all pairs tied)");
  }
  const std::int64_t s = total - x_ties - y_ties + joint_ties - 2 * discordant;
  return static_cast<double>(s) /
         (std::sqrt(static_cast<double>(total - x_ties)) * std::sqrt(static_cast<double>(total - y_ties)));
}

TauDifference bootstrap_tau_difference(std::span<const double> x1, std::span<const double> x2,
                                       std::span<const double> y, std::size_t replicates, std::uint64_t seed,
                                       unsigned jobs, double confidence) {
  if (x1.size() != y.size() || x2.size() != y.size()) {
    throw Error(ErrorKind::kInputDomain, "bootstrap_tau_difference: vectors must be aligned");
  }
  if (replicates < 100) throw Error(ErrorKind::kInputDomain, "bootstrap_tau_difference: need >= 100 replicates");
  const std::size_t n = y.size();

  TauDifference out;
  out.delta = kendall_tau_b(x1, y) - kendall_tau_b(x2, y);
  out.replicates = replicates;

  constexpr std::size_t kMaxAttempts = 1000;
  std::vector<double> deltas(replicates);
  std::vector<std::size_t> redraws(replicates, 0);
  parallel_for(replicates, jobs, [&](std::size_t r) {
    std::vector<double> a(n), b(n), c(n);
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
      Rng rng = Rng::derive(seed, {r, attempt});
      for (std::size_t i = 0; i < n; ++i) {
        const auto k = rng.uniform_index(n);
        a[i] = x1[k];
        b[i] = x2[k];
        c[i] = y[k];
      }
      try {
        deltas[r] = kendall_tau_b(a, c) - kendall_tau_b(b, c);
        return;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDegenerate) throw;
        ++redraws[r];
      }
    }
    throw Error(ErrorKind::kDegenerate, "bootstrap_tau_difference: every resample was degenerate");
  });
  out.redraws = std::accumulate(redraws.begin(), redraws.end(), std::size_t{0});
  const double tail = 0.5 * (1.0 - confidence);
  out.ci_low = quantile(deltas, tail);
  out.ci_high = quantile(std::move(deltas), 1.0 - tail);
  return out;
}

ChiSquareResult chi_square_contingency(const std::vector<std::vector<double>>& table) {
  const std::size_t rows = table.size();
  if (rows < 2) throw Error(ErrorKind::kInputDomain, "chi_square_contingency: need at least 2 rows");
  const std::size_t cols = table.front().size();
  if (cols < 2) throw Error(ErrorKind::kInputDomain, "chi_square_contingency: need at least 2 columns");
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (table[i].size() != cols) throw Error(ErrorKind::kInputDomain, "chi_square_contingency: ragged table");
    for (std::size_t j = 0; j < cols; ++j) {
      const double o = table[i][j];
      if (!(o >= 0.0) || !std::isfinite(o)) throw Error(ErrorKind::kInputDomain, "chi_square_contingency: bad count");
      row_sum[i] += o;
      col_sum[j] += o;
      total += o;
    }
  }
  ChiSquareResult out;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = row_sum[i] * col_sum[j] / (total > 0 ? total : 1.0);
      if (e <= 0.0) {
        throw Error(ErrorKind::kDegenerate, "chi_square_contingency: zero expected count in cell (" +
                                                std::to_string(i) + "," + std::to_string(j) + ")");
      }
      const double d = table[i][j] - e;
      out.statistic += d * d / e;
    }
  }
  out.df = static_cast<int>((rows - 1) * (cols - 1));
  out.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(out.df), out.statistic));
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::kEmptyInput, "quantile of empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::kInputDomain, "quantile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

std::string format_p_value(double p) {
  if (std::isnan(p)) return "NA";
  if (p < 1e-15) return "<1e-15";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", p);
  return buf;
}

}  // namespace falmkit
