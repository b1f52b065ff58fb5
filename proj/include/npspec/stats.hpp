#pragma once

#include <span>
#include <vector>

namespace npspec {

/// Pairwise (cascade) summation; the reduction tree depends only on the length.
double pairwise_sum(std::span<const double> values);

double median(std::vector<double> values);

struct LineFit {
  double slope = 0;
  double intercept = 0;
  std::size_t count = 0;
};

/// Ordinary least squares y = slope * x + intercept.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

} // namespace npspec
