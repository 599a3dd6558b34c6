#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "fbslab/errors.hpp"
#include "fbslab/innovations.hpp"

using namespace fbslab;
using namespace fbslab::innovations;

namespace {

InnovationModel two_tap(Link link, NoiseLaw noise, double w1 = 0.5) {
  return InnovationModel::from_taps(2, {{{0, 0}, 1.0}, {{1, 0}, w1}}, link, noise);
}

/// E f(Z) for Z ~ N(0, 1) by a fine midpoint rule on [-12, 12].
template <class F>
double gaussian_mean(F&& f) {
  const int steps = 200000;
  const double a = -12.0, h = 24.0 / steps;
  long double s = 0.0L;
  for (int k = 0; k < steps; ++k) {
    const double z = a + (k + 0.5) * h;
    s += f(z) * std::exp(-0.5 * z * z);
  }
  return static_cast<double>(s * h / std::sqrt(2.0 * std::numbers::pi));
}

InnovationModel random_model(Engine& eng, Link link, NoiseLaw noise) {
  std::uniform_int_distribution<Index> off(-2, 2);
  std::uniform_real_distribution<double> w(-1.0, 1.0);
  std::vector<FilterTap> taps{{{0, 0}, 1.0}};
  const int extra = std::uniform_int_distribution<int>(0, 4)(eng);
  for (int k = 0; k < extra; ++k) taps.push_back({{off(eng), off(eng)}, w(eng)});
  return InnovationModel::from_taps(2, taps, link, noise);
}

}  // namespace

TEST(Noise, NamesRoundTrip) {
  for (auto law : {NoiseLaw::StandardGaussian, NoiseLaw::Rademacher, NoiseLaw::CenteredExponential})
    EXPECT_EQ(noise_from_name(noise_name(law)), law);
  for (auto link : {Link::Linear, Link::Abs, Link::Tanh}) EXPECT_EQ(link_from_name(link_name(link)), link);
  EXPECT_THROW(noise_from_name("cauchy"), ConfigError);
  EXPECT_THROW(link_from_name("relu"), ConfigError);
}

TEST(Noise, MeanZeroUnitVariance) {
  for (auto law : {NoiseLaw::StandardGaussian, NoiseLaw::Rademacher, NoiseLaw::CenteredExponential}) {
    Engine eng(5);
    std::vector<double> x(400000);
    fill_noise(law, eng, x);
    long double m = 0.0L, v = 0.0L;
    for (double e : x) m += e;
    m /= x.size();
    for (double e : x) v += (e - m) * (e - m);
    v /= x.size();
    EXPECT_NEAR(static_cast<double>(m), 0.0, 0.01) << noise_name(law);
    EXPECT_NEAR(static_cast<double>(v), 1.0, 0.02) << noise_name(law);
  }
}

TEST(Noise, DifferenceNorms) {
  // eps - eps* is N(0, 2), a symmetric three-point law, or Laplace(1).
  EXPECT_NEAR(noise_difference_norm(NoiseLaw::StandardGaussian, 2.0), std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(noise_difference_norm(NoiseLaw::StandardGaussian, 4.0), std::pow(12.0, 0.25), 1e-13);
  EXPECT_NEAR(noise_difference_norm(NoiseLaw::Rademacher, 2.0), std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(noise_difference_norm(NoiseLaw::Rademacher, 4.0), std::pow(8.0, 0.25), 1e-13);
  EXPECT_NEAR(noise_difference_norm(NoiseLaw::CenteredExponential, 2.0), std::sqrt(2.0), 1e-13);
  EXPECT_NEAR(noise_difference_norm(NoiseLaw::CenteredExponential, 4.0), std::pow(24.0, 0.25), 1e-12);
}

TEST(InnovationModel, CenteringOfAbsoluteLink) {
  const auto g = InnovationModel::iid(1, NoiseLaw::StandardGaussian);
  const auto abs_g = InnovationModel(g.filter(), Link::Abs, NoiseLaw::StandardGaussian);
  EXPECT_NEAR(abs_g.centering(), std::sqrt(2.0 / std::numbers::pi), 1e-12);
  const auto abs_r = InnovationModel(g.filter(), Link::Abs, NoiseLaw::Rademacher);
  EXPECT_EQ(abs_r.centering(), 1.0);
  // Two Rademacher taps 1 and 0.5: |sum| takes 1.5 and 0.5 with equal odds.
  EXPECT_NEAR(two_tap(Link::Abs, NoiseLaw::Rademacher).centering(), 1.0, 1e-15);
  const double tanh_mean = gaussian_mean([](double z) { return std::tanh(std::sqrt(1.25) * z); });
  EXPECT_NEAR(two_tap(Link::Tanh, NoiseLaw::StandardGaussian).centering(), tanh_mean, 1e-10);
}

TEST(InnovationModel, FilterSummaries) {
  const auto m = InnovationModel::from_taps(2, {{{0, 0}, 1.0}, {{-2, 1}, -0.5}}, Link::Linear, NoiseLaw::Rademacher);
  EXPECT_EQ(m.filter_radius(), 2);
  EXPECT_DOUBLE_EQ(m.filter_sum(), 0.5);
  EXPECT_DOUBLE_EQ(m.filter_abs_sum(), 1.5);
  EXPECT_DOUBLE_EQ(m.filter_sq_sum(), 1.25);
  EXPECT_EQ(m.hash(), fnv1a(m.describe()));
  EXPECT_THROW(InnovationModel::from_taps(2, {{{0}, 1.0}}, Link::Linear, NoiseLaw::Rademacher), ConfigError);
}

TEST(Realize, TwoTapVarianceAndCovariance) {
  // psi = delta_0 + delta_{e1}: Var X = 2, Cov(X_0, X_{e1}) = 1.
  const auto model = two_tap(Link::Linear, NoiseLaw::StandardGaussian, 1.0);
  const Box region = Box::cube(2, 1, 300);
  const Field x = sample_field(model, region, 17);
  long double v = 0.0L, c = 0.0L;
  std::size_t nc = 0;
  for_each_index(region, [&](std::span<const Index> j) {
    v += x(j) * x(j);
    if (j[0] < 300) {
      const MultiIndex next{j[0] + 1, j[1]};
      c += x(j) * x(next);
      ++nc;
    }
  });
  EXPECT_NEAR(static_cast<double>(v / region.volume()), 2.0, 0.05);
  EXPECT_NEAR(static_cast<double>(c / nc), 1.0, 0.05);
}

TEST(Realize, DeterministicAndMethodIndependent) {
  Engine eng(23);
  for (auto link : {Link::Linear, Link::Abs, Link::Tanh}) {
    const auto model = random_model(eng, link, NoiseLaw::Rademacher);
    const Box region({-3, 2}, {9, 11});
    const Field a = sample_field(model, region, 99, ConvolutionMethod::Direct);
    const Field b = sample_field(model, region, 99, ConvolutionMethod::Fft);
    const Field c = sample_field(model, region, 99, ConvolutionMethod::Direct);
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_NEAR(a.values()[k], b.values()[k], 1e-12);
      EXPECT_EQ(a.values()[k], c.values()[k]);
    }
    const Field other = sample_field(model, region, 100);
    EXPECT_FALSE(std::ranges::equal(a.values(), other.values()));
  }
}

TEST(Coupling, DifferencesStayOnFilterSupportAndObeyLipschitz) {
  Engine eng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const Link link = std::array{Link::Linear, Link::Abs, Link::Tanh}[trial % 3];
    const auto model = random_model(eng, link, NoiseLaw::StandardGaussian);
    const Box region = Box::cube(2, -4, 4);
    const auto s = coupled_pair(model, region, 1000 + trial);
    const double jump = std::abs(s.noise(MultiIndex{0, 0}) - s.noise_star(MultiIndex{0, 0}));
    for_each_index(region, [&](std::span<const Index> i) {
      const double psi = model.filter().at_or_zero(i);
      const double diff = std::abs(s.x(i) - s.x_star(i));
      if (psi == 0.0) EXPECT_EQ(diff, 0.0);
      EXPECT_LE(diff, std::abs(psi) * jump + 1e-12);
    });
  }
}

TEST(Dependence, LinearClosedForm) {
  const auto m = InnovationModel::from_taps(1, {{{0}, 1.0}, {{1}, -0.5}}, Link::Linear, NoiseLaw::StandardGaussian);
  const auto d2 = dependence_measure(m, 2.0, 0, 1);
  EXPECT_TRUE(d2.is_exact);
  EXPECT_NEAR(d2.delta_p, 1.5 * std::sqrt(2.0), 1e-14);
  const auto id = InnovationModel::iid(1, NoiseLaw::Rademacher);
  EXPECT_NEAR(dependence_measure(id, 2.0, 0, 1).delta_p, std::sqrt(2.0), 1e-14);
  EXPECT_THROW(dependence_measure(id, 1.5, 0, 1), ConfigError);
}

TEST(Dependence, NonlinearBelowLipschitzBound) {
  const auto m = two_tap(Link::Tanh, NoiseLaw::StandardGaussian);
  const auto d = dependence_measure(m, 2.0, 20000, 3);
  EXPECT_FALSE(d.is_exact);
  EXPECT_GT(d.delta_p, 0.0);
  EXPECT_LE(d.delta_p, 1.5 * std::sqrt(2.0) + 3.0 * d.std_error);
}

TEST(LongRunVariance, LinearExamples) {
  EXPECT_DOUBLE_EQ(long_run_variance(InnovationModel::iid(2, NoiseLaw::Rademacher)).value, 1.0);
  const auto two = two_tap(Link::Linear, NoiseLaw::StandardGaussian, 1.0);
  EXPECT_DOUBLE_EQ(long_run_variance(two).value, 4.0);
  const auto diff = two_tap(Link::Linear, NoiseLaw::StandardGaussian, -1.0);
  const auto lr = long_run_variance(diff);
  EXPECT_TRUE(lr.exact);
  EXPECT_TRUE(lr.degenerate);
}

TEST(LongRunVariance, NonlinearIidMatchesQuadrature) {
  const auto m = InnovationModel(InnovationModel::iid(2, NoiseLaw::StandardGaussian).filter(), Link::Tanh,
                                 NoiseLaw::StandardGaussian);
  const double expect = gaussian_mean([](double z) { return std::tanh(z) * std::tanh(z); });
  const auto lr = long_run_variance(m, 7, 200, 0);
  EXPECT_FALSE(lr.exact);
  EXPECT_FALSE(lr.degenerate);
  EXPECT_NEAR(lr.value, expect, 4.0 * lr.std_error + 1e-3);
}

TEST(Truncation, Examples) {
  const auto m = InnovationModel::from_taps(1, {{{0}, 1.0}, {{1}, 0.5}, {{3}, 0.25}}, Link::Linear,
                                            NoiseLaw::StandardGaussian);
  EXPECT_DOUBLE_EQ(approximation_error(m, 0), std::sqrt(0.25 + 0.0625));
  EXPECT_DOUBLE_EQ(approximation_error(m, 2), 0.25);
  EXPECT_DOUBLE_EQ(approximation_error(m, 6), 0.0);
  EXPECT_DOUBLE_EQ(m_truncate(m, 2).filter_sum(), 1.5);
  EXPECT_THROW(m_truncate(two_tap(Link::Tanh, NoiseLaw::Rademacher), 2), UnsupportedOperation);
}

TEST(Truncation, PropertyErrorIsMonotoneAndVanishes) {
  Engine eng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = random_model(eng, Link::Linear, NoiseLaw::Rademacher);
    double prev = std::sqrt(model.filter_sq_sum()) + 1e-12;
    for (Index m = 0; m <= 6; ++m) {
      const double e = approximation_error(model, m);
      EXPECT_LE(e, prev + 1e-15);
      prev = e;
    }
    EXPECT_EQ(approximation_error(model, 2 * model.filter_radius()), 0.0);
  }
}

TEST(FilterAutocorrelation, Example) {
  const auto m = InnovationModel::from_taps(1, {{{0}, 1.0}, {{1}, 0.5}}, Link::Linear, NoiseLaw::Rademacher);
  const Field r = filter_autocorrelation(m.filter());
  EXPECT_DOUBLE_EQ(r(MultiIndex{0}), 1.25);
  EXPECT_DOUBLE_EQ(r(MultiIndex{1}), 0.5);
  EXPECT_DOUBLE_EQ(r(MultiIndex{-1}), 0.5);
}

TEST(FieldIo, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "fbslab_field_io_test";
  std::filesystem::create_directories(dir);
  const auto model = two_tap(Link::Abs, NoiseLaw::CenteredExponential);
  const Box region({-2, 0}, {5, 7});
  const Field x = sample_field(model, region, 55);
  write_field(dir / "f", x, {region, 55, model.hash()});
  FieldMetadata meta;
  const Field y = read_field(dir / "f", &meta);
  EXPECT_EQ(y.box(), region);
  EXPECT_EQ(meta.seed, 55u);
  EXPECT_EQ(meta.model_hash, model.hash());
  EXPECT_EQ(x.values().size(), y.values().size());
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_EQ(x.values()[k], y.values()[k]);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(read_field(dir / "missing"), std::runtime_error);
}
