#pragma once

#include <cstddef>
#include <vector>

namespace hermes::stats {

/// Mean with a 95 % confidence interval. Uses the normal quantile (1.96)
/// from 30 samples upward and Student's t below that.
struct MetricSummary {
  double mean = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  std::size_t count = 0;
  double stddev = 0.0;  // sample standard deviation

  double half_width() const { return (ci95_high - ci95_low) / 2.0; }
};

MetricSummary summarize(const std::vector<double>& values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares fit of y against x. Needs two distinct x values.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace hermes::stats
