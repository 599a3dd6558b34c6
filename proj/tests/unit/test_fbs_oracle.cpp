#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "fbslab/fbs_oracle.hpp"
#include "fbslab/rng.hpp"
#include "fbslab/stats.hpp"

using namespace fbslab;
using namespace fbslab::fbs;

TEST(FbsCovariance, Examples) {
  const std::vector<double> half{0.5, 0.5};
  const std::vector<double> one{1.0, 1.0}, mid{0.5, 0.5}, cross{0.5, 1.0};
  EXPECT_DOUBLE_EQ(fbs_covariance(half, one, one), 1.0);
  EXPECT_DOUBLE_EQ(fbs_covariance(half, mid, one), 0.25);
  EXPECT_DOUBLE_EQ(fbs_covariance(half, mid, cross), 0.25);
  EXPECT_DOUBLE_EQ(fbm_covariance(0.5, 0.3, 0.8), 0.3);
  const std::vector<double> bad{1.0, 0.5};
  EXPECT_THROW(fbs_covariance(bad, one, one), std::domain_error);
  const std::vector<double> zero{0.0, 0.5};
  EXPECT_THROW(fbs_covariance(zero, one, one), std::domain_error);
}

TEST(FbsCovariance, PropertySelfSimilarAndSymmetric) {
  Engine eng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0), hu(0.05, 0.95);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + static_cast<std::size_t>(trial % 3);
    std::vector<double> h(d), s(d), t(d), cs(d), ct(d);
    const double c = u(eng);
    double hsum = 0.0;
    for (std::size_t q = 0; q < d; ++q) {
      h[q] = hu(eng);
      s[q] = u(eng);
      t[q] = u(eng);
      cs[q] = c * s[q];
      ct[q] = c * t[q];
      hsum += h[q];
    }
    const double base = fbs_covariance(h, s, t);
    EXPECT_NEAR(fbs_covariance(h, t, s), base, 1e-15);
    EXPECT_NEAR(fbs_covariance(h, cs, ct), std::pow(c, 2.0 * hsum) * base, 1e-12);
    // Cauchy-Schwarz against the variances.
    EXPECT_LE(base * base, fbs_covariance(h, s, s) * fbs_covariance(h, t, t) + 1e-15);
  }
}

TEST(Grid, KroneckerEqualsDense) {
  Engine eng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0), hu(0.05, 0.95);
  for (int trial = 0; trial < 30; ++trial) {
    FbsGrid g;
    const std::size_t d = 1 + static_cast<std::size_t>(trial % 3);
    for (std::size_t q = 0; q < d; ++q) {
      g.hurst.push_back(hu(eng));
      std::vector<double> ax;
      for (int k = 0; k < 1 + trial % 4; ++k) ax.push_back((k + u(eng)) / 4.0);
      g.axes.push_back(ax);
    }
    const auto dense = dense_covariance(g), kron = kronecker_covariance(g);
    ASSERT_EQ(dense.rows(), static_cast<Eigen::Index>(g.size()));
    EXPECT_LE((dense - kron).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Grid, OneDimensionalBrownianExample) {
  const FbsGrid g{{0.5}, {{0.5, 1.0}}};
  Eigen::MatrixXd expect(2, 2);
  expect << 0.5, 0.5, 0.5, 1.0;
  EXPECT_LE((dense_covariance(g) - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW((FbsGrid{{0.5}, {{0.5, 0.5}}}.validate()), std::invalid_argument);
  EXPECT_THROW((FbsGrid{{0.5}, {{1.5}}}.validate()), std::invalid_argument);
}

TEST(Cholesky, RecoversMatrixAndReportsIndefinite) {
  const FbsGrid g{{0.7, 0.3}, {{0.25, 0.5, 1.0}, {0.3, 1.0}}};
  const auto c = dense_covariance(g);
  const auto r = cholesky_with_jitter(c);
  EXPECT_FALSE(r.jittered);
  EXPECT_LE((r.factor * r.factor.transpose() - c).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_GT(r.min_eigenvalue, 0.0);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(cholesky_with_jitter(bad), std::exception);
}

TEST(KroneckerSampler, EmpiricalCovarianceWithinMonteCarloError) {
  const FbsGrid g{{0.7, 0.3}, {{0.0, 0.5, 1.0}, {0.4, 1.0}}};
  const KroneckerSampler s(g);
  const std::int64_t count = 40000;
  const auto draws = s.sample(count, 12);
  const auto est = stats::second_moments(draws, g.size());
  const auto c = dense_covariance(g);
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = 0; b < g.size(); ++b) {
      const double target = c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      const double se = est.std_error[a * g.size() + b];
      if (target == 0.0) {
        EXPECT_EQ(est.value[a * g.size() + b], 0.0);  // t_1 = 0 rows are structural zeros
      } else {
        EXPECT_LE(std::abs(est.value[a * g.size() + b] - target), 4.0 * se) << a << "," << b;
      }
    }
}

TEST(KroneckerSampler, SinglePointIsStandardNormal) {
  const FbsGrid g{{0.6, 0.2}, {{1.0}, {1.0}}};
  const KroneckerSampler s(g);
  const auto draws = s.sample(5000, 4);
  const double d = stats::ks_statistic(draws, stats::normal_cdf);
  EXPECT_GT(stats::ks_pvalue(d, draws.size()), 0.01);
  EXPECT_EQ(s.sample_one(derive_seed(4, streams::kOracle, 3)), std::vector<double>(draws.begin() + 3, draws.begin() + 4));
}

TEST(DenseSampler, AgreesInDistributionWithKronecker) {
  const FbsGrid g{{0.7, 0.3}, {{0.5, 1.0}, {0.5, 1.0}}};
  const DenseSampler dense(g);
  const auto draws = dense.sample(40000, 21);
  const auto est = stats::second_moments(draws, g.size());
  const auto c = kronecker_covariance(g);
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = 0; b < g.size(); ++b)
      EXPECT_LE(std::abs(est.value[a * g.size() + b] - c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))),
                4.0 * est.std_error[a * g.size() + b]);
}
