#pragma once

// Small statistics helpers shared by the estimators, the bench harness and the tests.

#include <functional>
#include <optional>
#include <vector>

namespace slds {

struct MeanStderr {
  double mean = 0;
  double stderr_ = 0;  // sample sd / sqrt(count); 0 for a single value
  std::size_t count = 0;
};

MeanStderr mean_stderr(const std::vector<double>& values);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

/// Ordinary least squares y = a x + b. Needs two distinct x values.
std::optional<LinearFit> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Pearson correlation of average ranks; nullopt when either input is constant
/// or has fewer than two entries.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Average ranks (1-based), ties share the mean rank.
std::vector<double> ranks(const std::vector<double>& v);

/// sup |F_m - F| for a sample against a continuous CDF.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Critical value c(alpha) sqrt((m + k) / (m k)) of the two-sample KS test.
double ks_two_sample_critical(std::size_t m, std::size_t k, double alpha);

/// Lag-1 sample autocorrelation.
double lag1_autocorrelation(const std::vector<double>& v);

}  // namespace slds
