#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fbslab/rng.hpp"
#include "fbslab/stats.hpp"

using namespace fbslab;
using namespace fbslab::stats;

TEST(Kolmogorov, SurvivalFunctionValues) {
  // High-precision values of 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2).
  EXPECT_NEAR(kolmogorov_q(0.5), 0.9639452436648751, 1e-14);
  EXPECT_NEAR(kolmogorov_q(0.8), 0.5441424115741981, 1e-14);
  EXPECT_NEAR(kolmogorov_q(1.0), 0.26999967167735456, 1e-14);
  EXPECT_NEAR(kolmogorov_q(1.2), 0.11224966667072497, 1e-14);
  EXPECT_NEAR(kolmogorov_q(1.5), 0.022217962616525127, 1e-15);
  EXPECT_NEAR(kolmogorov_q(2.0), 0.0006709252557796953, 1e-16);
  EXPECT_EQ(kolmogorov_q(0.0), 1.0);
}

TEST(Kolmogorov, PvalueUsesCorrectedScale) {
  const std::size_t r = 100;
  const double d = 0.1;
  const double lambda = (10.0 + 0.12 + 0.011) * d;
  EXPECT_DOUBLE_EQ(ks_pvalue(d, r), kolmogorov_q(lambda));
}

TEST(Kolmogorov, StatisticExamples) {
  EXPECT_DOUBLE_EQ(ks_statistic({0.0}, normal_cdf), 0.5);
  const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  EXPECT_NEAR(ks_statistic({0.25, 0.75}, uniform), 0.25, 1e-15);
  EXPECT_THROW(ks_statistic({}, uniform), std::invalid_argument);
}

TEST(Kolmogorov, UniformPvaluesUnderNull) {
  // Under the null the p-value is roughly uniform: about 5% fall below 0.05.
  Engine eng(13);
  std::normal_distribution<double> z;
  int below = 0;
  const int tests = 400;
  for (int k = 0; k < tests; ++k) {
    std::vector<double> x(500);
    for (double& v : x) v = z(eng);
    if (ks_pvalue(ks_statistic(x, normal_cdf), x.size()) < 0.05) ++below;
  }
  EXPECT_NEAR(below / static_cast<double>(tests), 0.05, 0.035);
}

TEST(NormalCdf, Values) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(normal_cdf(-2.5), 0.006209665325776132, 1e-17);
}

TEST(Moments, RademacherSampleExample) {
  const std::vector<double> x{1.0, -1.0, 1.0, -1.0};
  const auto m = gaussian_moments(x, 1.0);
  EXPECT_EQ(m.empirical, (std::array<double, 4>{0.0, 1.0, 0.0, 1.0}));
  EXPECT_EQ(m.target, (std::array<double, 4>{0.0, 1.0, 0.0, 3.0}));
  EXPECT_DOUBLE_EQ(m.std_error[3], std::sqrt(96.0 / 4.0));
  EXPECT_DOUBLE_EQ(m.z[3], -2.0 / std::sqrt(24.0));
  EXPECT_TRUE(m.within(0.5));
  EXPECT_FALSE(m.within(0.3));
}

TEST(Moments, GaussianSampleWithinFourSigma) {
  Engine eng(14);
  std::normal_distribution<double> z(0.0, 2.0);
  std::vector<double> x(20000);
  for (double& v : x) v = z(eng);
  EXPECT_TRUE(gaussian_moments(x, 4.0).within(4.0));
  EXPECT_FALSE(gaussian_moments(x, 1.0).within(4.0));
}

TEST(Summaries, MeanVarianceAndAbsMoment) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(mean(x), 2.5);
  EXPECT_DOUBLE_EQ(variance(x), 5.0 / 3.0);
  const auto a = abs_moment(std::vector<double>{-2.0, 2.0}, 2.0);
  EXPECT_DOUBLE_EQ(a.value, 4.0);
  EXPECT_DOUBLE_EQ(a.std_error, 0.0);
  const auto p = pnorm(std::vector<double>{-3.0, 3.0, 3.0}, 4.0, 50, 1);
  EXPECT_NEAR(p.value, 3.0, 1e-14);
  EXPECT_NEAR(p.std_error, 0.0, 1e-14);
}

TEST(Summaries, SecondMoments) {
  // Rows (1, 2) and (-1, 0).
  const std::vector<double> rows{1.0, 2.0, -1.0, 0.0};
  const auto c = second_moments(rows, 2);
  EXPECT_EQ(c.p, 2u);
  EXPECT_DOUBLE_EQ(c.value[0], 1.0);
  EXPECT_DOUBLE_EQ(c.value[1], 1.0);
  EXPECT_DOUBLE_EQ(c.value[2], 1.0);
  EXPECT_DOUBLE_EQ(c.value[3], 2.0);
  EXPECT_DOUBLE_EQ(c.std_error[0], 0.0);
}
