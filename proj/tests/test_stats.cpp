#include <gtest/gtest.h>

#include <cmath>

#include "slds/random.hpp"
#include "slds/stats.hpp"

using namespace slds;

TEST(Stats, MeanStderr) {
  const auto m = mean_stderr({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.stderr_, std::sqrt((1.25 * 4 / 3) / 4), 1e-15);
  EXPECT_EQ(mean_stderr({7}).stderr_, 0.0);
}

TEST(Stats, LinearFitExactLine) {
  const auto f = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
  ASSERT_TRUE(f);
  EXPECT_NEAR(f->slope, 2.0, 1e-14);
  EXPECT_NEAR(f->intercept, 1.0, 1e-14);
  EXPECT_NEAR(f->r2, 1.0, 1e-14);
}

TEST(Stats, LinearFitR2MatchesSquaredPearson) {
  RandomStream rng(3);
  std::vector<double> x, y;
  for (int i = 0; i < 50; ++i) {
    x.push_back(i);
    y.push_back(0.3 * i + 5.0 * rng.normal());
  }
  const auto f = linear_fit(x, y);
  double mx = 0, my = 0;
  for (int i = 0; i < 50; ++i) mx += x[i] / 50, my += y[i] / 50;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 50; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  EXPECT_NEAR(f->r2, sxy * sxy / (sxx * syy), 1e-12);
}

TEST(Stats, LinearFitDegenerate) {
  EXPECT_FALSE(linear_fit({1}, {2}));
  EXPECT_FALSE(linear_fit({1, 1}, {2, 3}));
}

TEST(Stats, SpearmanMonotoneAndTies) {
  EXPECT_NEAR(*spearman({1, 2, 3, 4}, {1, 4, 9, 16}), 1.0, 1e-15);
  EXPECT_NEAR(*spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_FALSE(spearman({1}, {1}));
  EXPECT_FALSE(spearman({1, 2}, {3, 3}));
  const auto r = ranks({10, 20, 20, 30});
  EXPECT_EQ(r, (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Stats, SpearmanClassicFormulaWithoutTies) {
  // 1 - 6 sum d^2 / (k (k^2 - 1))
  std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 5};
  double d2 = 0;
  for (int i = 0; i < 5; ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
  EXPECT_NEAR(*spearman(x, y), 1.0 - 6.0 * d2 / (5 * 24), 1e-14);
}

TEST(Stats, KsAgainstUniform) {
  RandomStream rng(8);
  std::vector<double> u;
  for (int i = 0; i < 10'000; ++i) u.push_back(rng.uniform());
  EXPECT_LT(ks_statistic(u, [](double t) { return std::clamp(t, 0.0, 1.0); }), 1.36 / 100.0);
  EXPECT_NEAR(ks_statistic({0.5}, [](double t) { return t; }), 0.5, 1e-15);
}

TEST(Stats, KsTwoSample) {
  EXPECT_EQ(ks_two_sample({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_EQ(ks_two_sample({1, 2}, {3, 4}), 1.0);
  EXPECT_NEAR(ks_two_sample_critical(100, 100, 0.01), 1.6276 * std::sqrt(0.02), 1e-3);
}

TEST(Stats, Lag1) {
  EXPECT_NEAR(lag1_autocorrelation({1, -1, 1, -1, 1, -1}), -5.0 / 6.0, 1e-12);
}
