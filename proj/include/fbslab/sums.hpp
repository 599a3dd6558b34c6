#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fbslab/innovations.hpp"
#include "fbslab/kernels.hpp"
#include "fbslab/lattice.hpp"

namespace fbslab::sums {

using Point = std::vector<double>;

/// Lambda_n = {1..n_1} x ... x {1..n_d}.
Box lattice_box(std::span<const Index> n);
/// Sites j with b_{n,j} possibly nonzero: Lambda_n shifted by minus the kernel support.
Box weight_support(const kernels::ProductKernel& kernel, std::span<const Index> n);

/// xi_j = sum_i a_{j-i} X_i on Lambda_n, as d successive one-axis convolutions.
/// X must cover weight_support(kernel, n); otherwise std::invalid_argument.
Field linear_field(const kernels::ProductKernel& kernel, const Field& x, std::span<const Index> n,
                   ConvolutionMethod method = ConvolutionMethod::Auto);

struct PartialSumProcess {
  std::vector<Index> n;
  std::vector<Point> t;
  std::vector<double> values;  ///< S_n(t), not normalized
  double normalizer = 1.0;     ///< b_n
};

/// floor(n_q t_q) per axis.
std::vector<Index> scaled_corner(std::span<const Index> n, const Point& t);

/// One pass of prefix sums over xi (which must live on Lambda_n) serves every grid point.
PartialSumProcess partial_sum_process(const Field& xi, const std::vector<Point>& t_grid, double normalizer = 1.0);

enum class SamplerRoute { Auto, Field, Weights };

struct SamplerOptions {
  SamplerRoute route = SamplerRoute::Auto;
  /// Explicitly simulated noise extends this far beyond Lambda_n on each side; < 0 means n_q.
  Index near_margin = -1;
  /// Gaussian noise with the linear link only: the noise outside the near box enters
  /// through its exact Gaussian contribution instead of being dropped.
  bool far_field = true;
  std::size_t budget_bytes = std::size_t{2} << 30;
};

/// Draws (S_n(t))_t for a fixed kernel, model, n and grid.
///
/// The field route realizes X on the full weight support, filters it into xi and reads
/// S_n(t) off the prefix sums. The weights route contracts X directly against the
/// per-axis tables b_{floor(n t),j}(q); it only simulates a near box and, when allowed,
/// adds the far-field term from its exact covariance.
class PartialSumSampler {
 public:
  PartialSumSampler(const kernels::ProductKernel& kernel, const innovations::InnovationModel& model,
                    std::vector<Index> n, std::vector<Point> t_grid, SamplerOptions options = {});

  std::vector<double> sample(std::uint64_t replica_seed) const;

  SamplerRoute route() const { return route_; }
  double normalizer() const { return normalizer_; }
  const std::vector<Point>& t_grid() const { return t_; }
  const std::vector<Index>& n() const { return n_; }
  const Box& noise_box() const { return noise_box_; }
  bool far_field_active() const { return far_active_; }
  /// Share of Var S_n(1) carried by the far field (0 when inactive).
  double far_field_fraction() const { return far_fraction_; }
  /// Exact Cov(S_n(t), S_n(s)) when the model is Gaussian and linear; empty otherwise.
  const std::vector<double>& exact_covariance() const { return exact_cov_; }

 private:
  std::vector<double> sample_field_route(std::uint64_t seed) const;
  std::vector<double> sample_weights_route(std::uint64_t seed) const;
  void setup_weights_route(const SamplerOptions& options);

  kernels::ProductKernel kernel_;
  innovations::InnovationModel model_;
  std::vector<Index> n_;
  std::vector<Point> t_;
  std::vector<std::vector<Index>> corners_;
  SamplerRoute route_ = SamplerRoute::Field;
  double normalizer_ = 1.0;
  Box support_;
  Box noise_box_;

  // Weights route.
  Box x_box_;
  std::vector<std::vector<Index>> unique_;           // per axis, distinct positive floor(n_q t_q)
  std::vector<std::vector<std::size_t>> slot_;       // per point, per axis position in unique_ (or npos)
  std::vector<std::vector<std::vector<double>>> w_;  // per axis, per unique value, weights over x_box_ axis
  bool far_active_ = false;
  double far_fraction_ = 0.0;
  std::vector<double> far_factor_;  // P x P, row-major
  std::vector<double> exact_cov_;
};

struct BlockingDiagnostics {
  Index m = 0;
  Index l = 1;
  std::int64_t replicas = 0;
  double error_ma = 0.0;
  double error_avg = 0.0;
  double error_blk = 0.0;
  double se_ma = 0.0;
  double se_avg = 0.0;
  double se_blk = 0.0;
  double sigma_ml = 0.0;
  /// (2p [1 - ((l-m-1)/l)^d] l^d c_n^2)^{1/2} Dbar_p / b_n with p = 2.
  double blk_bound = 0.0;
};

/// Monte Carlo norms of the three approximation steps, each divided by b_n:
/// X -> Xbar (m-truncation), b -> block averages c, and full blocks -> interior blocks
/// of side l - m - 1. Linear link only; throws ConfigError("l") unless l > m + 1.
BlockingDiagnostics blocking_decomposition(const kernels::ProductKernel& kernel,
                                           const innovations::InnovationModel& model, std::span<const Index> n,
                                           Index m, Index l, std::int64_t replicas, std::uint64_t seed,
                                           std::size_t budget_bytes = std::size_t{2} << 30);

/// sum_{i in {m+1-l..l-m-1}^d} E(Xbar_0 Xbar_i) prod_r (1 - (m+1+|i_r|)/l), exactly.
double sigma_ml(const innovations::InnovationModel& model, Index m, Index l);

}  // namespace fbslab::sums
