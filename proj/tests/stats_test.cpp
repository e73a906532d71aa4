#include "falmkit/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "falmkit/error.hpp"
#include "test_support.hpp"

using namespace falmkit;
using falmkit::testing::column;
using falmkit::testing::fixture;

namespace {

struct Groups {
  std::vector<double> a, b;
};

Groups eer_fixture() {
  const CsvTable t = read_csv(fixture("eer_groups.csv"));
  Groups g;
  for (const auto& r : t.rows()) (r.fields[0] == "a" ? g.a : g.b).push_back(*parse_real(r.fields[1]));
  return g;
}

}  // namespace

TEST(Eer, MatchesBruteForceOracle) {
  const Groups g = eer_fixture();
  ASSERT_EQ(g.a.size(), 100u);
  const EerResult r = eer(g.a, g.b);
  EXPECT_NEAR(r.eer, 0.11, 1e-12);
  EXPECT_NEAR(r.threshold, 51.150000000000006, 1e-9);
  EXPECT_FALSE(r.a_above);

  const std::vector<double> a70(g.a.begin(), g.a.begin() + 70);
  const EerResult r70 = eer(a70, g.b);
  EXPECT_NEAR(r70.eer, 0.12, 1e-12);
  EXPECT_NEAR(r70.threshold, 51.309999999999995, 1e-9);
}

TEST(Eer, TrivialCases) {
  EXPECT_EQ(eer(std::vector<double>{1, 2, 3}, std::vector<double>{10, 11}).eer, 0.0);
  EXPECT_NEAR(eer(std::vector<double>{5, 5, 5}, std::vector<double>{5, 5}).eer, 0.5, 1e-12);
  const std::vector<double> same{1, 2, 3, 4, 5};
  EXPECT_NEAR(eer(same, same).eer, 0.5, 1e-12);
  EXPECT_THROW(eer(std::vector<double>{}, same), Error);
  EXPECT_THROW(eer(std::vector<double>{NAN}, same), Error);
}

TEST(Eer, SymmetricAndShiftInvariant) {
  std::mt19937 gen(21);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(20 + trial), b(35);
    for (auto& v : a) v = std::round(10 * n(gen)) / 10;
    for (auto& v : b) v = std::round(10 * (n(gen) + 0.8)) / 10;
    const EerResult ab = eer(a, b);
    const EerResult ba = eer(b, a);
    EXPECT_NEAR(ab.eer, ba.eer, 1e-12);
    EXPECT_GE(ab.eer, 0.0);
    EXPECT_LE(ab.eer, 0.5);
    auto as = a, bs = b;
    for (auto& v : as) v += 37.5;
    for (auto& v : bs) v += 37.5;
    const EerResult shifted = eer(as, bs);
    EXPECT_NEAR(shifted.eer, ab.eer, 1e-9);
    EXPECT_NEAR(shifted.threshold, ab.threshold + 37.5, 1e-9);
  }
}

TEST(Eer, ErrorRateAtThreshold) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(error_rate_at(v, 2.5, true), 0.5);
  EXPECT_DOUBLE_EQ(error_rate_at(v, 2.0, true), 0.5);
  EXPECT_DOUBLE_EQ(error_rate_at(v, 3.5, false), 0.25);
}

TEST(Range, Examples) {
  EXPECT_EQ(subject_range(std::vector<double>{10, 48}), 38.0);
  EXPECT_EQ(subject_range(std::vector<double>{42}), 0.0);
  EXPECT_THROW(subject_range(std::vector<double>{}), Error);
  const auto s = summarize_ranges(std::vector<double>{2, 4, 6});
  EXPECT_EQ(s.n_subjects, 3u);
  EXPECT_DOUBLE_EQ(s.mean, 4.0);
  EXPECT_DOUBLE_EQ(s.sd, 2.0);
  EXPECT_EQ(summarize_ranges(std::vector<double>{7}).sd, 0.0);

  const auto r = intra_subject_range({{"S1", {10, 48, 20}}, {"S2", {5, 6}}, {"S3", {30}}},
                                     {{"S1", "B"}, {"S2", "B"}, {"S3", "W"}});
  EXPECT_EQ(r.per_subject.at("S1"), 38.0);
  EXPECT_DOUBLE_EQ(r.per_group.at("B").mean, 19.5);
  EXPECT_EQ(r.per_group.at("W").n_subjects, 1u);
}

TEST(Pearson, MatchesOracle) {
  const auto x = column(fixture("pearson_50.csv"), "x");
  const auto y = column(fixture("pearson_50.csv"), "y");
  const auto r = pearson(x, y);
  EXPECT_NEAR(r.rho, 0.42374560274443008549, 1e-12);
  EXPECT_NEAR(r.ci_low, 0.16484060657110311238, 1e-9);
  EXPECT_NEAR(r.ci_high, 0.62801930930188537165, 1e-9);
  EXPECT_EQ(r.n, 50u);
}

TEST(Pearson, PerfectAndAffineInvariant) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  std::vector<double> up, down;
  for (double v : x) {
    up.push_back(3 * v + 1);
    down.push_back(-2 * v);
  }
  EXPECT_NEAR(pearson(x, up).rho, 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, down).rho, -1.0, 1e-12);

  const auto px = column(fixture("pearson_50.csv"), "x");
  const auto py = column(fixture("pearson_50.csv"), "y");
  std::vector<double> tx, ty;
  for (double v : px) tx.push_back(4.0 * v - 7.0);
  for (double v : py) ty.push_back(-0.5 * v + 2.0);
  EXPECT_NEAR(pearson(tx, ty).rho, -pearson(px, py).rho, 1e-12);
  EXPECT_THROW(pearson(x, std::vector<double>(6, 1.0)), Error);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), Error);
}

TEST(Kendall, MatchesOracleWithTies) {
  const auto x = column(fixture("kendall_ties.csv"), "x");
  const auto y = column(fixture("kendall_ties.csv"), "y");
  EXPECT_NEAR(kendall_tau_b(x, y), 0.20891003470929866905, 1e-12);
}

TEST(Kendall, ExtremesAndMonotoneInvariance) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(kendall_tau_b(x, std::vector<double>{2, 4, 6, 8, 10}), 1.0, 1e-15);
  EXPECT_NEAR(kendall_tau_b(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_THROW(kendall_tau_b(x, std::vector<double>(5, 3.0)), Error);

  const auto kx = column(fixture("kendall_ties.csv"), "x");
  const auto ky = column(fixture("kendall_ties.csv"), "y");
  std::vector<double> ex;
  for (double v : kx) ex.push_back(std::exp(v / 3.0) + 2.0);
  EXPECT_NEAR(kendall_tau_b(ex, ky), kendall_tau_b(kx, ky), 1e-12);
  EXPECT_NEAR(kendall_tau_b(ky, kx), kendall_tau_b(kx, ky), 1e-12);
}

TEST(Kendall, AgreesWithQuadraticCount) {
  std::mt19937 gen(5);
  std::uniform_int_distribution<int> u(0, 6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(40), y(40);
    for (std::size_t i = 0; i < 40; ++i) {
      x[i] = u(gen);
      y[i] = u(gen) + 0.5 * x[i];
    }
    double c = 0, d = 0, tx = 0, ty = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      for (std::size_t j = i + 1; j < 40; ++j) {
        const double s = (x[i] - x[j]) * (y[i] - y[j]);
        if (s > 0) ++c;
        else if (s < 0) ++d;
        else if (x[i] == x[j] && y[i] != y[j]) ++tx;
        else if (y[i] == y[j] && x[i] != x[j]) ++ty;
      }
    }
    const double expected = (c - d) / std::sqrt((c + d + tx) * (c + d + ty));
    EXPECT_NEAR(kendall_tau_b(x, y), expected, 1e-12);
  }
}

TEST(Bootstrap, DeterministicAndJobIndependent) {
  const auto x = column(fixture("kendall_ties.csv"), "x");
  const auto y = column(fixture("kendall_ties.csv"), "y");
  std::vector<double> x2;
  for (double v : x) x2.push_back(-v);
  const auto a = bootstrap_tau_difference(x, x2, y, 500, 99, 1);
  const auto b = bootstrap_tau_difference(x, x2, y, 500, 99, 4);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_EQ(a.ci_high, b.ci_high);
  EXPECT_NEAR(a.delta, 2 * kendall_tau_b(x, y), 1e-12);
  EXPECT_LE(a.ci_low, a.delta);
  EXPECT_GE(a.ci_high, a.delta);
  EXPECT_EQ(a.replicates, 500u);
}

TEST(Bootstrap, IdenticalPredictorsGiveZero) {
  const auto x = column(fixture("kendall_ties.csv"), "x");
  const auto y = column(fixture("kendall_ties.csv"), "y");
  const auto r = bootstrap_tau_difference(x, x, y, 200, 3, 2);
  EXPECT_EQ(r.delta, 0.0);
  EXPECT_EQ(r.ci_low, 0.0);
  EXPECT_EQ(r.ci_high, 0.0);
}

TEST(ChiSquare, MatchesOracle) {
  const auto r = chi_square_contingency({{10, 20}, {20, 10}});
  EXPECT_NEAR(r.statistic, 6.6666666666666666667, 1e-12);
  EXPECT_EQ(r.df, 1);
  EXPECT_NEAR(r.p_value, 0.009823274507519235, 1e-12);
}

TEST(ChiSquare, IdenticalRowsAndShape) {
  const auto same = chi_square_contingency({{5, 10, 15}, {5, 10, 15}});
  EXPECT_NEAR(same.statistic, 0.0, 1e-15);
  EXPECT_NEAR(same.p_value, 1.0, 1e-15);
  EXPECT_EQ(same.df, 2);
  const auto six = chi_square_contingency({{1, 7}, {2, 22}, {6, 36}, {14, 22}, {30, 10}, {47, 3}});
  EXPECT_EQ(six.df, 5);
  EXPECT_GT(six.statistic, 0.0);
  EXPECT_THROW(chi_square_contingency({{0, 5}, {0, 7}}), Error);
}

TEST(Summaries, QuantileMeanSd) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile({10, 0, 20}, 0.25), 5.0);
  EXPECT_DOUBLE_EQ(mean(std::vector<double>{1, 2, 6}), 3.0);
  EXPECT_DOUBLE_EQ(sample_sd(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}), std::sqrt(32.0 / 7.0));
}

TEST(Summaries, FormatPValue) {
  EXPECT_EQ(format_p_value(1e-20), "<1e-15");
  EXPECT_EQ(format_p_value(0.0), "<1e-15");
  EXPECT_EQ(format_p_value(0.0123456), "0.01235");
  EXPECT_EQ(format_p_value(NAN), "NA");
}
