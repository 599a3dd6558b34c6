#include <gtest/gtest.h>

#include <random>

#include "fbslab/lattice.hpp"
#include "fbslab/reference.hpp"
#include "fbslab/rng.hpp"

using namespace fbslab;

namespace {

Field random_field(const Box& box, Engine& eng) {
  Field f(box);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : f.values()) v = u(eng);
  return f;
}

Box random_box(std::size_t d, Index max_side, Index max_shift, Engine& eng) {
  std::uniform_int_distribution<Index> side(1, max_side), shift(-max_shift, max_shift);
  MultiIndex lo(d), hi(d);
  for (std::size_t q = 0; q < d; ++q) {
    lo[q] = shift(eng);
    hi[q] = lo[q] + side(eng) - 1;
  }
  return Box(lo, hi);
}

}  // namespace

TEST(Box, VolumeAndContainment) {
  const Box b({1, -2}, {3, 2});
  EXPECT_EQ(b.volume(), 15u);
  EXPECT_TRUE(b.contains(MultiIndex{2, 0}));
  EXPECT_FALSE(b.contains(MultiIndex{0, 0}));
  EXPECT_TRUE(Box({0, 0}, {-1, 5}).empty());
}

TEST(Box, MinkowskiSumAndReflection) {
  const Box a({1, 1}, {4, 4});
  const Box k({0, -1}, {2, 1});
  EXPECT_EQ(a.minkowski_sum(k), Box({1, 0}, {6, 5}));
  EXPECT_EQ(k.reflected(), Box({-2, -1}, {0, 1}));
  EXPECT_EQ(a.intersect(Box({3, 0}, {9, 2})), Box({3, 1}, {4, 2}));
}

TEST(Field, RowMajorOffsets) {
  Field f(Box({0, 0}, {1, 2}));
  EXPECT_EQ(f.offset(MultiIndex{0, 1}), 1u);
  EXPECT_EQ(f.offset(MultiIndex{1, 0}), 3u);
  MultiIndex idx(2);
  unflatten(f.box(), 4, idx);
  EXPECT_EQ(idx, (MultiIndex{1, 1}));
  EXPECT_EQ(f.at_or_zero(MultiIndex{5, 5}), 0.0);
}

TEST(ForEachIndex, VisitsEverySiteOnceInOrder) {
  const Box b({-1, 2, 0}, {1, 3, 1});
  std::size_t k = 0;
  Field f(b);
  for_each_index(b, [&](std::span<const Index> j) { EXPECT_EQ(f.offset(j), k++); });
  EXPECT_EQ(k, b.volume());
}

TEST(ScaledIndex, Floors) {
  EXPECT_EQ(scaled_index(10, 0.25), 2);
  EXPECT_EQ(scaled_index(8, 1.0), 8);
  EXPECT_EQ(scaled_index(3, 0.3), 0);
  // 0.7 * 10 is 6.999... in binary; the corner must still be 7.
  EXPECT_EQ(scaled_index(10, 0.7), 7);
}

TEST(PrefixSums, MatchBruteForce) {
  Engine eng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const Box b = Box::cube(d, 1, 2 + trial % 4);
    Field f = random_field(b, eng);
    const Field orig = f;
    inclusive_prefix_sums(f);
    for_each_index(b, [&](std::span<const Index> j) {
      const MultiIndex m(j.begin(), j.end());
      EXPECT_NEAR(f(j), reference::box_sum(orig, m), 1e-12);
    });
  }
}

TEST(Convolve, DirectAndFftAgreeWithReference) {
  Engine eng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const Field filter = random_field(random_box(d, 4, 2, eng), eng);
    const Box out = random_box(d, 6, 3, eng);
    const Field in = random_field(out.minkowski_sum(filter.box().reflected()), eng);
    const Field ref = reference::convolve(in, filter, out);
    for (auto method : {ConvolutionMethod::Direct, ConvolutionMethod::Fft, ConvolutionMethod::Auto}) {
      const Field got = convolve(in, filter, out, method);
      ASSERT_EQ(got.box(), out);
      for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got.values()[k], ref.values()[k], 1e-10);
    }
  }
}

TEST(Convolve, AxisConvolutionMatchesFullFilter) {
  Engine eng(3);
  const Box out({0, 0}, {5, 4});
  const std::vector<double> taps{0.5, -1.0, 2.0};
  const Field in = random_field(Box({-3, 0}, {6, 4}), eng);
  Field filter(Box({-1, 0}, {1, 0}));
  for (std::size_t k = 0; k < 3; ++k) filter.values()[k] = taps[k];
  const Field ref = reference::convolve(in, filter, out);
  for (auto method : {ConvolutionMethod::Direct, ConvolutionMethod::Fft}) {
    const Field got = convolve_axis(in, 0, taps, -1, out, method);
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got.values()[k], ref.values()[k], 1e-12);
  }
}

TEST(Convolve, RejectsUncoveredOutput) {
  const Field in(Box({0}, {3}), 1.0);
  const Field filter(Box({0}, {2}), 1.0);
  EXPECT_THROW(convolve(in, filter, Box({0}, {3})), std::invalid_argument);
}
