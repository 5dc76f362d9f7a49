#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hermes/stats.hpp"

using namespace hermes::stats;

TEST(Summary, IntervalContainsMeanAndUsesNormalQuantile) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> dist(100.0, 15.0);
  std::vector<double> v(400);
  for (auto& x : v) x = dist(rng);
  const auto s = summarize(v);
  EXPECT_EQ(s.count, 400u);
  EXPECT_LT(s.ci95_low, s.mean);
  EXPECT_GT(s.ci95_high, s.mean);
  EXPECT_NEAR(s.half_width(), 1.96 * s.stddev / 20.0, 1e-9);
  EXPECT_NEAR(s.mean, 100.0, 3.0);
  EXPECT_NEAR(s.stddev, 15.0, 1.5);
}

TEST(Summary, SmallSamplesUseStudentT) {
  const auto s = summarize({1.0, 2.0, 3.0, 4.0, 5.0});
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_NEAR(s.stddev, std::sqrt(2.5), 1e-12);
  // t quantile for 4 degrees of freedom.
  EXPECT_NEAR(s.half_width(), 2.776445 * std::sqrt(2.5) / std::sqrt(5.0), 1e-5);
}

TEST(Summary, IntervalShrinksWithRootN) {
  std::mt19937_64 rng(62);
  std::exponential_distribution<double> dist(0.1);
  auto width = [&](std::size_t n) {
    double total = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> v(n);
      for (auto& x : v) x = dist(rng);
      total += summarize(v).half_width();
    }
    return total / 50.0;
  };
  const double ratio = width(400) / width(1600);
  EXPECT_NEAR(ratio, 2.0, 0.2);
}

TEST(Summary, DegenerateInputs) {
  EXPECT_EQ(summarize({}).count, 0u);
  const auto one = summarize({7.0});
  EXPECT_EQ(one.mean, 7.0);
  EXPECT_EQ(one.ci95_low, 7.0);
  EXPECT_EQ(one.ci95_high, 7.0);
}

TEST(LinearFit, ExactLineAndNoise) {
  const auto f = linear_fit({50, 100, 200, 400}, {350, 700, 1400, 2800});
  EXPECT_NEAR(f.slope, 7.0, 1e-12);
  EXPECT_NEAR(f.intercept, 0.0, 1e-9);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);

  const auto g = linear_fit({1, 2, 3, 4}, {1, 3, 2, 4});
  EXPECT_NEAR(g.slope, 0.8, 1e-12);
  EXPECT_NEAR(g.intercept, 0.5, 1e-12);
  EXPECT_NEAR(g.r_squared, 0.64, 1e-12);
}

TEST(LinearFit, RejectsBadInput) {
  EXPECT_THROW(linear_fit({1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(linear_fit({1.0, 1.0}, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(linear_fit({1.0, 2.0}, {1.0}), std::invalid_argument);
}
