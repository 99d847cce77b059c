#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bdsde {

// Deterministic pairwise summation. Fixed association order independent of
// thread count, and more accurate than naive left-to-right accumulation.
double pairwise_sum(std::span<const double> v);

double mean(std::span<const double> v);
double sample_variance(std::span<const double> v);  // unbiased, n-1
double standard_error(std::span<const double> v);   // sd / sqrt(n)

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // standard error of the slope estimate
};

// Ordinary least squares y ~ intercept + slope * x. Needs >= 2 points.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// Least-squares slope of log(y) against log(x). All inputs must be > 0.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

}  // namespace bdsde
