#include "fbslab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fbslab/rng.hpp"

namespace fbslab::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Theta-function form, fast for small lambda.
    const double pi = std::numbers::pi;
    const double c = -pi * pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double term = std::exp(c * (2 * k - 1) * (2 * k - 1));
      s += term;
      if (term < 1e-18) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

double ks_pvalue(double d, std::size_t r) {
  const double sr = std::sqrt(static_cast<double>(r));
  return kolmogorov_q((sr + 0.12 + 0.11 / sr) * d);
}

bool MomentComparison::within(double zmax) const {
  return std::all_of(z.begin(), z.end(), [&](double v) { return std::abs(v) <= zmax; });
}

MomentComparison gaussian_moments(std::span<const double> sample, double sigma_sq) {
  if (sample.empty()) throw std::invalid_argument("gaussian_moments: empty sample");
  MomentComparison m;
  std::array<long double, 4> acc{};
  for (double x : sample) {
    long double p = 1.0L;
    for (int k = 0; k < 4; ++k) {
      p *= x;
      acc[static_cast<std::size_t>(k)] += p;
    }
  }
  const auto n = static_cast<double>(sample.size());
  const double s2 = sigma_sq;
  m.target = {0.0, s2, 0.0, 3.0 * s2 * s2};
  const std::array<double, 4> var{s2, 2.0 * s2 * s2, 15.0 * s2 * s2 * s2, 96.0 * s2 * s2 * s2 * s2};
  for (std::size_t k = 0; k < 4; ++k) {
    m.empirical[k] = static_cast<double>(acc[k] / static_cast<long double>(n));
    m.std_error[k] = std::sqrt(var[k] / n);
    m.z[k] = m.std_error[k] > 0.0 ? (m.empirical[k] - m.target[k]) / m.std_error[k] : 0.0;
  }
  return m;
}

double mean(std::span<const double> x) {
  long double s = 0.0L;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : static_cast<double>(s / static_cast<long double>(x.size()));
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  long double s = 0.0L;
  for (double v : x) s += static_cast<long double>(v - m) * (v - m);
  return static_cast<double>(s / static_cast<long double>(x.size() - 1));
}

Estimate abs_moment(std::span<const double> x, double p) {
  std::vector<double> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = std::pow(std::abs(x[i]), p);
  return {mean(a), std::sqrt(variance(a) / static_cast<double>(std::max<std::size_t>(1, a.size())))};
}

Estimate pnorm(std::span<const double> x, double p, int resamples, std::uint64_t seed) {
  if (x.empty()) return {};
  std::vector<double> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = std::pow(std::abs(x[i]), p);
  Estimate e;
  e.value = std::pow(mean(a), 1.0 / p);
  if (resamples < 2) return e;
  Engine engine = make_engine(seed, streams::kBootstrap, 0);
  std::uniform_int_distribution<std::size_t> pick(0, a.size() - 1);
  std::vector<double> boot(static_cast<std::size_t>(resamples));
  for (auto& b : boot) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[pick(engine)];
    b = std::pow(static_cast<double>(s / static_cast<long double>(a.size())), 1.0 / p);
  }
  e.std_error = std::sqrt(variance(boot));
  return e;
}

CovarianceEstimate second_moments(std::span<const double> rows, std::size_t p) {
  if (p == 0 || rows.size() % p != 0) throw std::invalid_argument("second_moments: bad shape");
  const std::size_t count = rows.size() / p;
  CovarianceEstimate c;
  c.p = p;
  c.value.assign(p * p, 0.0);
  c.std_error.assign(p * p, 0.0);
  std::vector<long double> s1(p * p, 0.0L), s2(p * p, 0.0L);
  for (std::size_t r = 0; r < count; ++r) {
    const double* v = rows.data() + r * p;
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) {
        const long double x = static_cast<long double>(v[a]) * v[b];
        s1[a * p + b] += x;
        s2[a * p + b] += x * x;
      }
  }
  const auto n = static_cast<long double>(count);
  for (std::size_t k = 0; k < p * p; ++k) {
    const long double m = s1[k] / n;
    const long double var = count > 1 ? std::max(0.0L, (s2[k] - n * m * m) / (n - 1.0L)) : 0.0L;
    c.value[k] = static_cast<double>(m);
    c.std_error[k] = static_cast<double>(std::sqrt(var / n));
  }
  return c;
}

}  // namespace fbslab::stats
