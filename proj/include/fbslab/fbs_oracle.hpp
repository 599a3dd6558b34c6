#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fbslab::fbs {

/// 1/2 (s^{2h} + t^{2h} - |s-t|^{2h}).
double fbm_covariance(double h, double s, double t);

/// Product of per-axis fBm covariances; std::domain_error unless every H_q is in (0,1).
double fbs_covariance(std::span<const double> hurst, std::span<const double> s, std::span<const double> t);

/// Tensor grid axes[0] x ... x axes[d-1] of points in [0,1]^d, enumerated row-major.
struct FbsGrid {
  std::vector<double> hurst;
  std::vector<std::vector<double>> axes;

  void validate() const;
  std::size_t dim() const { return axes.size(); }
  std::size_t size() const;
  std::vector<std::vector<double>> points() const;
};

Eigen::MatrixXd axis_covariance(double h, std::span<const double> coords);
/// fbs_covariance evaluated entrywise over grid.points().
Eigen::MatrixXd dense_covariance(const FbsGrid& grid);
/// C_1 kron ... kron C_d, in the same point order.
Eigen::MatrixXd kronecker_covariance(const FbsGrid& grid);

struct CholeskyResult {
  Eigen::MatrixXd factor;  ///< lower triangular
  bool jittered = false;
  double min_eigenvalue = 0.0;
};

/// Plain Cholesky; on failure adds 1e-12 trace/size to the diagonal once. Throws
/// NumericError (with size, trace and smallest eigenvalue) if that fails too or if the
/// matrix has an eigenvalue below -1e-10.
CholeskyResult cholesky_with_jitter(const Eigen::MatrixXd& c);

/// Per-axis factors over the strictly positive coordinates; zero coordinates give
/// structural zeros.
struct AxisFactor {
  std::vector<double> coords;
  std::vector<std::size_t> positive;
  Eigen::MatrixXd covariance;
  CholeskyResult cholesky;
};

class KroneckerSampler {
 public:
  explicit KroneckerSampler(FbsGrid grid);

  const FbsGrid& grid() const { return grid_; }
  const AxisFactor& factor(std::size_t q) const { return factors_[q]; }
  /// One draw of (B^H(t))_t: z i.i.d. N(0,1), multiplied mode-wise by the L_q.
  std::vector<double> sample_one(std::uint64_t sample_seed) const;
  /// count x grid.size(), row-major; sample i uses derive_seed(seed, kOracle, i).
  std::vector<double> sample(std::int64_t count, std::uint64_t seed) const;

 private:
  FbsGrid grid_;
  std::vector<AxisFactor> factors_;
};

/// Reference sampler: one Cholesky of the full grid covariance built from fbs_covariance.
class DenseSampler {
 public:
  explicit DenseSampler(FbsGrid grid);

  const Eigen::MatrixXd& covariance() const { return cov_; }
  std::vector<double> sample(std::int64_t count, std::uint64_t seed) const;

 private:
  FbsGrid grid_;
  Eigen::MatrixXd cov_;
  std::vector<std::size_t> positive_;
  CholeskyResult chol_;
};

void write_covariance_csv(const std::filesystem::path& path, const Eigen::MatrixXd& c,
                          const std::vector<std::vector<double>>& points);

}  // namespace fbslab::fbs
