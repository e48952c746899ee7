#pragma once

#include <span>
#include <vector>

namespace lipstab::stats {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// Least squares y = intercept + slope * x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Fit of log y against log x; entries with y <= 0 are dropped.
LinearFit loglog_fit(std::span<const double> x, std::span<const double> y);

/// Least squares polynomial coefficients c_0..c_deg.
std::vector<double> poly_fit(std::span<const double> x, std::span<const double> y, int degree);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

double median(std::vector<double> v);

}  // namespace lipstab::stats
