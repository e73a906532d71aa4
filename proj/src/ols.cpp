#include "falmkit/ols.hpp"

#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <numbers>

#include "falmkit/error.hpp"

namespace falmkit {

double ModelFit::coefficient(const std::string& term) const {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i] == term) return coefficients[i + 1];
  }
  throw Error(ErrorKind::kInputDomain, "model has no term '" + term + "'");
}

bool ModelFit::has_term(const std::string& term) const {
  return std::find(terms.begin(), terms.end(), term) != terms.end();
}

double gaussian_log_likelihood(double rss, double scale, std::size_t n) {
  const double floor = std::max(scale * 1e-20, std::numeric_limits<double>::min());
  const double nn = static_cast<double>(n);
  const double sigma2 = std::max(rss, floor) / nn;
  return -0.5 * nn * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0);
}

ModelFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, std::vector<std::string> terms) {
  const auto n = static_cast<std::size_t>(design.rows());
  const auto p = static_cast<std::size_t>(design.cols());
  if (static_cast<std::size_t>(response.size()) != n) throw Error(ErrorKind::kInputDomain, "ols_fit: size mismatch");
  if (terms.size() + 1 != p) throw Error(ErrorKind::kInputDomain, "ols_fit: need one name per non-intercept column");
  if (n <= p) throw Error(ErrorKind::kInputDomain, "ols_fit: need more observations than parameters");
  if (!design.allFinite() || !response.allFinite()) throw Error(ErrorKind::kInputDomain, "ols_fit: non-finite data");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (static_cast<std::size_t>(qr.rank()) < p) {
    throw Error(ErrorKind::kSingularDesign, "ols_fit: design matrix is rank deficient");
  }
  const Eigen::VectorXd beta = qr.solve(response);
  const Eigen::VectorXd residual = response - design * beta;

  ModelFit fit;
  fit.terms = std::move(terms);
  fit.coefficients.assign(beta.data(), beta.data() + beta.size());
  fit.n = n;
  fit.rss = residual.squaredNorm();
  const double ybar = response.mean();
  fit.tss = (response.array() - ybar).square().sum();
  fit.r_squared = fit.tss > 0.0 ? std::clamp(1.0 - fit.rss / fit.tss, 0.0, 1.0) : 0.0;
  const double scale = std::max(fit.tss, response.squaredNorm());
  fit.log_likelihood = gaussian_log_likelihood(fit.rss, scale, n);
  fit.k = static_cast<int>(p) + 1;
  fit.aic = 2.0 * fit.k - 2.0 * fit.log_likelihood;
  return fit;
}

ModelFit ols_fit(const std::vector<std::vector<double>>& predictors, std::span<const double> response,
                 std::vector<std::string> terms) {
  const auto n = static_cast<Eigen::Index>(response.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(predictors.size()) + 1);
  x.col(0).setOnes();
  for (std::size_t j = 0; j < predictors.size(); ++j) {
    if (static_cast<Eigen::Index>(predictors[j].size()) != n) {
      throw Error(ErrorKind::kInputDomain, "ols_fit: predictor length mismatch");
    }
    x.col(static_cast<Eigen::Index>(j) + 1) = Eigen::Map<const Eigen::VectorXd>(predictors[j].data(), n);
  }
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(response.data(), n);
  return ols_fit(x, y, std::move(terms));
}

FTestResult nested_f_test(const ModelFit& reduced, const ModelFit& full) {
  if (reduced.n != full.n) throw Error(ErrorKind::kNesting, "nested_f_test: models fit different observations");
  for (const auto& t : reduced.terms) {
    if (!full.has_term(t)) throw Error(ErrorKind::kNesting, "nested_f_test: term '" + t + "' missing from full model");
  }
  FTestResult out;
  out.df1 = static_cast<int>(full.terms.size()) - static_cast<int>(reduced.terms.size());
  out.df2 = static_cast<int>(full.n) - static_cast<int>(full.terms.size()) - 1;
  if (out.df1 <= 0) throw Error(ErrorKind::kNesting, "nested_f_test: full model adds no terms");
  if (out.df2 <= 0) throw Error(ErrorKind::kInputDomain, "nested_f_test: no residual degrees of freedom");

  const double gain = reduced.rss - full.rss;
  const double noise_floor = 1e-12 * std::max(reduced.tss, 1e-300);
  if (gain <= noise_floor) {
    out.f = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.f = (gain / out.df1) / (std::max(full.rss, std::numeric_limits<double>::min()) / out.df2);
  out.p_value = boost::math::cdf(boost::math::complement(boost::math::fisher_f(out.df1, out.df2), out.f));
  return out;
}

}  // namespace falmkit
