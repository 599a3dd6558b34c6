#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fbslab::stats {

double normal_cdf(double x);

/// sup_x |F_R(x) - F(x)|.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
/// Kolmogorov survival function Q(lambda) = 2 sum_k (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);
/// Asymptotic p-value with the (sqrt R + 0.12 + 0.11/sqrt R) small-sample correction.
double ks_pvalue(double d, std::size_t r);

/// First four raw moments against N(0, sigma^2), standard errors from the Gaussian
/// variances of X^k (sigma^2, 2 sigma^4, 15 sigma^6, 96 sigma^8).
struct MomentComparison {
  std::array<double, 4> empirical{};
  std::array<double, 4> target{};
  std::array<double, 4> std_error{};
  std::array<double, 4> z{};
  bool within(double zmax) const;
};
MomentComparison gaussian_moments(std::span<const double> sample, double sigma_sq);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

double mean(std::span<const double> x);
/// Unbiased sample variance.
double variance(std::span<const double> x);

/// (mean |x|^p)^{1/p} with a bootstrap standard error.
Estimate pnorm(std::span<const double> x, double p, int resamples, std::uint64_t seed);
/// mean |x|^p with its plain standard error.
Estimate abs_moment(std::span<const double> x, double p);

/// Second moments E x_a x_b of mean-zero vectors (rows of a count x p row-major array),
/// each with the standard error sd(x_a x_b)/sqrt(count).
struct CovarianceEstimate {
  std::size_t p = 0;
  std::vector<double> value;
  std::vector<double> std_error;
};
CovarianceEstimate second_moments(std::span<const double> rows, std::size_t p);

}  // namespace fbslab::stats
