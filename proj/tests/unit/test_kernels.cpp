#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fbslab/errors.hpp"
#include "fbslab/kernels.hpp"
#include "fbslab/reference.hpp"
#include "fbslab/rng.hpp"

using namespace fbslab;
using namespace fbslab::kernels;

namespace {

TruncationPolicy small(Index radius) { return {1e-6, radius}; }

/// Random finite-support kernel with taps inside [-radius, radius].
AxisKernel random_finite(Engine& eng, Index radius) {
  std::uniform_int_distribution<Index> pos(-radius, radius);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Index first = pos(eng);
  const Index last = std::uniform_int_distribution<Index>(first, radius)(eng);
  std::vector<double> taps(static_cast<std::size_t>(last - first + 1));
  for (double& t : taps) t = u(eng);
  return AxisKernel::finite_support(taps, first);
}

}  // namespace

TEST(AxisKernel, FractionalGammaRecurrence) {
  const auto k = AxisKernel::fractional_gamma(0.2);
  EXPECT_EQ(k.coeff(0), 1.0);
  EXPECT_NEAR(k.coeff(1), 0.2, 1e-15);
  EXPECT_NEAR(k.coeff(2), 0.12, 1e-15);
  EXPECT_EQ(k.coeff(-1), 0.0);
  EXPECT_DOUBLE_EQ(k.declared_hurst(), 0.7);
}

TEST(AxisKernel, FractionalGammaMatchesGammaRatio) {
  // Gamma(i + alpha) / (Gamma(alpha) Gamma(i + 1)) through lgamma, an independent route.
  const double alpha = 0.2;
  const auto k = AxisKernel::fractional_gamma(alpha);
  for (Index i : {1, 10, 100, 1000, 100000}) {
    const double expect = std::exp(std::lgamma(i + alpha) - std::lgamma(alpha) - std::lgamma(i + 1.0));
    EXPECT_NEAR(k.coeff(i) / expect, 1.0, 1e-10) << "i=" << i;
  }
  // High-precision values.
  EXPECT_NEAR(k.coeff(10), 0.034245173248, 1e-13);
  EXPECT_NEAR(k.coeff(1000), 0.00086710710501772110619, 1e-16);
}

TEST(AxisKernel, DifferencedPower) {
  for (double alpha : {0.1, 0.2, 0.45}) {
    const auto k = AxisKernel::differenced_power(alpha, small(1000));
    EXPECT_EQ(k.coeff(0), 1.0);
    EXPECT_NEAR(k.coeff(1), std::pow(2.0, -alpha) - 1.0, 1e-15);
    EXPECT_NEAR(k.coeff(7), std::pow(8.0, -alpha) - std::pow(7.0, -alpha), 1e-15);
    EXPECT_DOUBLE_EQ(k.declared_hurst(), 0.5 - alpha);
  }
}

TEST(AxisKernel, RegularlyVaryingAndLogCorrected) {
  const auto rv = AxisKernel::regularly_varying(0.8, 0.0, small(100));
  EXPECT_NEAR(rv.coeff(3), (std::pow(4.0, 0.2) - std::pow(3.0, 0.2)) / 0.2, 1e-14);
  EXPECT_NEAR(rv.declared_hurst(), 0.7, 1e-15);
  const auto lc = AxisKernel::log_corrected(0.8, small(100));
  EXPECT_NEAR(lc.coeff(5), std::pow(5.0, -0.5) * std::pow(std::log(6.0), -0.8), 1e-15);
  EXPECT_EQ(lc.declared_hurst(), 1.0);
  EXPECT_FALSE(lc.fbs_eligible());
}

TEST(AxisKernel, IdentityAndFiniteSupport) {
  const auto id = AxisKernel::identity();
  EXPECT_EQ(id.coeff(0), 1.0);
  EXPECT_EQ(id.coeff(1), 0.0);
  EXPECT_EQ(id.coeff(-3), 0.0);
  const auto fs = AxisKernel::finite_support({1.0, 2.0, 3.0}, -1);
  EXPECT_EQ(fs.coeff(-1), 1.0);
  EXPECT_EQ(fs.coeff(1), 3.0);
  EXPECT_EQ(fs.coeff(2), 0.0);
}

TEST(AxisKernel, ParameterWindowsAreEnforced) {
  EXPECT_THROW(AxisKernel::fractional_gamma(0.7), ConfigError);
  EXPECT_THROW(AxisKernel::fractional_gamma(0.0), ConfigError);
  EXPECT_THROW(AxisKernel::differenced_power(0.5), ConfigError);
  EXPECT_THROW(AxisKernel::regularly_varying(0.4), ConfigError);
  EXPECT_THROW(AxisKernel::log_corrected(0.5), ConfigError);
  EXPECT_THROW(AxisKernel::finite_support({}), ConfigError);
  try {
    AxisKernel::fractional_gamma(0.7);
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "alpha");
    EXPECT_NE(std::string(e.what()).find("(0, 1/2)"), std::string::npos);
  }
}

TEST(AxisKernel, TruncationHonoursTailTolerance) {
  // With a loose tolerance the rule stops before the cap; the discarded share is then below tail_tol.
  const auto k = AxisKernel::regularly_varying(0.9, 0.0, {1e-2, Index{1} << 22});
  EXPECT_FALSE(k.truncation_capped());
  EXPECT_LE(k.tail_fraction(), 1e-2);
  const auto capped = AxisKernel::fractional_gamma(0.3, {1e-6, 1000});
  EXPECT_TRUE(capped.truncation_capped());
  EXPECT_EQ(capped.truncation_radius(), 1000);
  EXPECT_EQ(capped.coeff(1001), 0.0);
}

TEST(AxisWeightTable, IdentityExample) {
  const auto w = axis_weight_table(AxisKernel::identity(), 4);
  EXPECT_EQ(w.lo, 1);
  EXPECT_EQ(w.hi(), 4);
  for (Index j = 1; j <= 4; ++j) EXPECT_EQ(w.at(j), 1.0);
  EXPECT_EQ(w.at(0), 0.0);
  EXPECT_EQ(w.at(5), 0.0);
  EXPECT_DOUBLE_EQ(w.norm(), 2.0);
}

TEST(AxisWeightTable, FiniteSupportExample) {
  const auto w = axis_weight_table(AxisKernel::finite_support({1.0, 1.0}), 2);
  EXPECT_EQ(w.at(1), 2.0);
  EXPECT_EQ(w.at(0), 1.0);
  EXPECT_EQ(w.at(2), 1.0);
}

TEST(AxisWeightTable, PropertyMatchesDoubleSumAndMassIdentity) {
  Engine eng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = random_finite(eng, 8);
    const Index n = std::uniform_int_distribution<Index>(1, 16)(eng);
    const auto w = axis_weight_table(k, n);
    const auto ref = reference::axis_weights(k, n);
    ASSERT_EQ(w.lo, ref.lo);
    ASSERT_EQ(w.values.size(), ref.values.size());
    double mass = 0.0, total = 0.0;
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      EXPECT_NEAR(w.values[i], ref.values[i], 1e-12);
      total += w.values[i];
    }
    for (double a : k.coefficients()) mass += a;
    EXPECT_NEAR(total, static_cast<double>(n) * mass, 1e-10);
    EXPECT_NEAR(w.norm_sq, ref.norm_sq, 1e-12 * std::max(1.0, ref.norm_sq));
  }
}

TEST(WeightTable, ProductIdentityAgainstBruteForce) {
  Engine eng(202);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 1 + static_cast<std::size_t>(trial % 3);
    std::vector<AxisKernel> axes;
    std::vector<Index> n(d);
    for (std::size_t q = 0; q < d; ++q) {
      axes.push_back(random_finite(eng, 8));
      n[q] = std::uniform_int_distribution<Index>(1, 8)(eng);
    }
    const ProductKernel kernel(axes);
    const WeightTable table(kernel, n);
    long double norm_sq = 0.0L;
    for_each_index(table.support(), [&](std::span<const Index> j) {
      const double brute = reference::weight(kernel, n, j);
      EXPECT_NEAR(table.weight(j), brute, 1e-12 * std::max(1.0, std::abs(brute)));
      norm_sq += static_cast<long double>(brute) * brute;
    });
    EXPECT_NEAR(table.norm_sq() / static_cast<double>(norm_sq), 1.0, 1e-10);
  }
}

TEST(BlockAverages, Examples) {
  const auto w = axis_weight_table(AxisKernel::identity(), 4);
  const auto c = axis_block_averages(w, 2);
  EXPECT_EQ(c.at(0), 1.0);
  EXPECT_EQ(c.at(1), 1.0);
  EXPECT_EQ(c.at(-1), 0.0);
  const auto c1 = axis_block_averages(w, 1);
  for (Index k = 0; k < 4; ++k) EXPECT_EQ(c1.at(k), w.at(k + 1));
}

TEST(BlockAverages, PropertyMatchesBlockMeans) {
  Engine eng(303);
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = random_finite(eng, 5);
    const Index n = std::uniform_int_distribution<Index>(1, 20)(eng);
    const Index l = std::uniform_int_distribution<Index>(1, 5)(eng);
    const auto w = axis_weight_table(k, n);
    const auto c = axis_block_averages(w, l);
    for (Index kk = c.k_lo - 1; kk <= c.k_hi() + 1; ++kk) {
      double s = 0.0;
      for (Index j = kk * l + 1; j <= (kk + 1) * l; ++j) s += w.at(j);
      EXPECT_NEAR(c.at(kk), s / static_cast<double>(l), 1e-13);
    }
  }
}

TEST(BlockAverages, ProductReconstruction) {
  const ProductKernel kernel({AxisKernel::finite_support({1.0, 0.5}), AxisKernel::finite_support({0.3, 1.0, -0.2}, -1)});
  const std::vector<Index> n{5, 4};
  const auto table = block_averages(WeightTable(kernel, n), 3);
  for_each_index(table.block_support(), [&](std::span<const Index> k) {
    double s = 0.0;
    const Box block({k[0] * 3 + 1, k[1] * 3 + 1}, {k[0] * 3 + 3, k[1] * 3 + 3});
    for_each_index(block, [&](std::span<const Index> j) { s += table.weight(j); });
    EXPECT_NEAR(table.block_average(k), s / 9.0, 1e-13);
  });
}

namespace {

/// Direct evaluation of the three regularity statistics by enumerating every site.
RegularityStats brute_regularity(const WeightTable& table_in, Index l) {
  const auto table = block_averages(table_in, l);
  const double bn_sq = table.norm_sq();
  RegularityStats st;
  Box sites = table.block_support();
  for (std::size_t q = 0; q < sites.dim(); ++q) {
    sites.lo[q] = sites.lo[q] * l + 1;
    sites.hi[q] = (sites.hi[q] + 1) * l;
  }
  long double s1 = 0.0L, s2 = 0.0L;
  MultiIndex k(sites.dim());
  for_each_index(sites, [&](std::span<const Index> j) {
    for (std::size_t q = 0; q < j.size(); ++q) k[q] = static_cast<Index>(std::floor(static_cast<double>(j[q] - 1) / static_cast<double>(l)));
    const double b = table.weight(j), c = table.block_average(k);
    s1 += static_cast<long double>(b - c) * (b - c);
    s2 += std::abs(static_cast<long double>(b) * b - static_cast<long double>(c) * c);
  });
  double cmax = 0.0;
  for_each_index(table.block_support(), [&](std::span<const Index> kk) { cmax = std::max(cmax, std::abs(table.block_average(kk))); });
  st.cs1 = static_cast<double>(s1 / bn_sq);
  st.cs2 = static_cast<double>(s2 / bn_sq);
  st.cs3 = cmax / table.block_norm();
  return st;
}

}  // namespace

TEST(RegularityStats, MatchesBruteForce) {
  Engine eng(404);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 1 + static_cast<std::size_t>(trial % 3);
    std::vector<AxisKernel> axes;
    std::vector<Index> n(d);
    for (std::size_t q = 0; q < d; ++q) {
      axes.push_back(random_finite(eng, 4));
      n[q] = std::uniform_int_distribution<Index>(2, 9)(eng);
    }
    const WeightTable table(ProductKernel(axes), n);
    const Index l = std::uniform_int_distribution<Index>(1, 4)(eng);
    if (!(block_averages(table, l).block_norm_sq() > 0.0)) continue;
    const auto got = regularity_stats(table, l);
    const auto ref = brute_regularity(table, l);
    EXPECT_NEAR(got.cs1, ref.cs1, 1e-10 * std::max(1.0, ref.cs1));
    EXPECT_NEAR(got.cs2, ref.cs2, 1e-10 * std::max(1.0, ref.cs2));
    EXPECT_NEAR(got.cs3, ref.cs3, 1e-12);
  }
}

TEST(RegularityStats, IdentityExamples) {
  const std::vector<Index> n1{100};
  const WeightTable t1(ProductKernel({AxisKernel::identity()}), n1);
  const auto one = regularity_stats(t1, 1);
  EXPECT_EQ(one.cs1, 0.0);
  EXPECT_EQ(one.cs2, 0.0);
  EXPECT_EQ(regularity_stats(t1, 2).cs1, 0.0);
  const std::vector<Index> n2{1000};
  const WeightTable t2(ProductKernel({AxisKernel::identity()}), n2);
  EXPECT_LT(regularity_stats(t2, 2).cs3, regularity_stats(t1, 2).cs3);
}

TEST(RegularityStats, FractionalGammaDecreases) {
  const ProductKernel k({AxisKernel::fractional_gamma(0.2)});
  RegularityStats prev{1e9, 1e9, 1e9, 0.0};
  for (Index n : {256, 1024, 4096}) {
    const std::vector<Index> nn{n};
    const auto st = regularity_stats(WeightTable(k, nn), 4);
    EXPECT_LT(st.cs1, prev.cs1);
    EXPECT_LT(st.cs2, prev.cs2);
    EXPECT_LT(st.cs3, prev.cs3);
    prev = st;
  }
  EXPECT_NEAR(prev.block_mass_ratio, 1.0, 0.05);
}

TEST(RegularityStats, DegenerateWeightsThrow) {
  // a_1 = 1, a_2 = -1 and n = 1 give b_0 = 1, b_{-1} = -1, which cancel in the block {-1, 0}.
  const std::vector<Index> n{1};
  const WeightTable t(ProductKernel({AxisKernel::finite_support({1.0, -1.0}, 1)}), n);
  EXPECT_THROW(regularity_stats(t, 2), NumericError);
}

TEST(ScalingRatio, Examples) {
  const auto id = AxisKernel::identity();
  EXPECT_DOUBLE_EQ(scaling_ratio(id, 101, 0.5), 50.0 / 101.0);
  EXPECT_DOUBLE_EQ(scaling_ratio(id, 64, 1.0), 1.0);
  const auto fg = AxisKernel::fractional_gamma(0.2);
  const double target = std::pow(0.25, 1.4);
  EXPECT_NEAR(scaling_ratio(fg, 1 << 14, 0.25) / target, 1.0, 0.02);
  EXPECT_THROW(scaling_ratio(id, 3, 0.2), std::invalid_argument);
}

TEST(ProductKernel, CoefficientsFactorize) {
  const ProductKernel k({AxisKernel::fractional_gamma(0.2, small(10)), AxisKernel::differenced_power(0.3, small(10))});
  const MultiIndex i{3, 2};
  EXPECT_DOUBLE_EQ(k.coeff(i), k.axis(0).coeff(3) * k.axis(1).coeff(2));
  EXPECT_EQ(k.hurst(), (std::vector<double>{0.7, 0.2}));
  EXPECT_TRUE(k.fbs_eligible());
}

TEST(FamilyCatalogue, NamesRoundTrip) {
  for (const auto& f : family_catalogue()) EXPECT_EQ(family_from_name(f.name), f.family);
  EXPECT_THROW(family_from_name("gamma"), ConfigError);
}
