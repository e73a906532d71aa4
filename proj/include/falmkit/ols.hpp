#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

namespace falmkit {

/// Ordinary least squares fit with Gaussian likelihood summaries.
struct ModelFit {
  std::vector<std::string> terms;    // predictor names, intercept excluded
  std::vector<double> coefficients;  // intercept first, then one per term
  double r_squared = 0.0;
  double rss = 0.0;
  double tss = 0.0;
  double log_likelihood = 0.0;  // at the MLE variance rss / n
  int k = 0;                    // intercept + slopes + error variance
  double aic = 0.0;             // 2k - 2 log_likelihood
  std::size_t n = 0;

  [[nodiscard]] double coefficient(const std::string& term) const;
  [[nodiscard]] bool has_term(const std::string& term) const;
};

/// Fits response ~ 1 + predictors. `design` must already contain the intercept column first.
/// Throws kSingularDesign when the design is rank deficient, kInputDomain when n <= columns.
ModelFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, std::vector<std::string> terms);

/// Convenience overload that prepends the intercept column.
ModelFit ols_fit(const std::vector<std::vector<double>>& predictors, std::span<const double> response,
                 std::vector<std::string> terms);

/// Gaussian log-likelihood at the MLE variance. The residual variance is floored at a tiny
/// fraction of the response scale so exact fits compare by parameter count instead of by
/// round-off.
double gaussian_log_likelihood(double rss, double scale, std::size_t n);

struct FTestResult {
  double f = 0.0;
  int df1 = 0;
  int df2 = 0;
  double p_value = 1.0;
};

/// Extra-sum-of-squares F test of a reduced model against a full model that contains it.
/// Throws kNesting when the term sets are not nested or the sample sizes differ.
FTestResult nested_f_test(const ModelFit& reduced, const ModelFit& full);

}  // namespace falmkit
