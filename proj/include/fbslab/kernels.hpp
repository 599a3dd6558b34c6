#pragma once

#include <span>
#include <string>
#include <vector>

#include "fbslab/lattice.hpp"

namespace fbslab::kernels {

enum class Family { FractionalGamma, DifferencedPower, RegularlyVarying, LogCorrected, Identity, FiniteSupport };

std::string family_name(Family family);
/// Throws ConfigError for unknown names.
Family family_from_name(const std::string& name);

struct FamilyInfo {
  Family family;
  std::string name;
  std::string parameters;
  std::string hurst_rule;
};
const std::vector<FamilyInfo>& family_catalogue();

/// Infinite-support families are cut at the smallest radius whose estimated
/// discarded squared mass is below tail_tol of the total, but never beyond
/// max_radius. Long-memory families hit the cap; the achieved tail fraction
/// is then reported by the kernel.
struct TruncationPolicy {
  double tail_tol = 1e-6;
  Index max_radius = Index{1} << 22;
};

/// One-dimensional coefficient sequence a_i(q), stored on [lo, hi].
class AxisKernel {
 public:
  /// a_0 = 1, a_i = a_{i-1} (i-1+alpha)/i, alpha in (0, 1/2); H = alpha + 1/2.
  static AxisKernel fractional_gamma(double alpha, const TruncationPolicy& policy = {});
  /// a_0 = 1, a_i = (i+1)^-alpha - i^-alpha, alpha in (0, 1/2); H = 1/2 - alpha.
  static AxisKernel differenced_power(double alpha, const TruncationPolicy& policy = {});
  /// a_i = ((i+1)^(1-alpha) - i^(1-alpha)) / (1-alpha) * log(e+i)^log_power ~ i^-alpha l(i),
  /// alpha in (1/2, 1); H = 3/2 - alpha.
  static AxisKernel regularly_varying(double alpha, double log_power = 0.0, const TruncationPolicy& policy = {});
  /// a_0 = 1, a_i = i^-1/2 log(i+1)^-alpha, alpha > 1/2; H = 1 (not fBs-eligible).
  static AxisKernel log_corrected(double alpha, const TruncationPolicy& policy = {});
  static AxisKernel identity();
  /// taps[k] is a_{first+k}.
  static AxisKernel finite_support(std::vector<double> taps, Index first = 0);

  Family family() const { return family_; }
  double alpha() const { return alpha_; }
  double log_power() const { return log_power_; }

  /// Exact coefficient, 0 outside the stored range.
  double coeff(Index i) const;
  std::span<const double> coefficients() const { return coeffs_; }
  Index lo() const { return lo_; }
  Index hi() const { return lo_ + static_cast<Index>(coeffs_.size()) - 1; }
  Index truncation_radius() const;

  double declared_hurst() const { return hurst_; }
  bool fbs_eligible() const { return hurst_ > 0.0 && hurst_ < 1.0; }
  double tail_fraction() const { return tail_fraction_; }
  bool truncation_capped() const { return capped_; }

  std::string name() const;

 private:
  AxisKernel() = default;
  template <class Coeff, class Tail>
  static AxisKernel truncated(Family family, double alpha, double hurst, const TruncationPolicy& policy, Coeff&& coeff,
                              Tail&& tail);

  Family family_ = Family::Identity;
  double alpha_ = 0.0;
  double log_power_ = 0.0;
  double hurst_ = 0.5;
  Index lo_ = 0;
  std::vector<double> coeffs_;
  double tail_fraction_ = 0.0;
  bool capped_ = false;
};

/// a_i = prod_q a_{i_q}(q).
class ProductKernel {
 public:
  explicit ProductKernel(std::vector<AxisKernel> axes);

  std::size_t dim() const { return axes_.size(); }
  const AxisKernel& axis(std::size_t q) const { return axes_[q]; }
  const std::vector<AxisKernel>& axes() const { return axes_; }

  double coeff(std::span<const Index> i) const;
  std::vector<double> hurst() const;
  bool fbs_eligible() const;
  /// Box of indices carrying stored coefficients.
  Box support() const;
  std::string name() const;

 private:
  std::vector<AxisKernel> axes_;
};

/// b_{n,j}(q) = sum_{i=1}^{n} a_{i-j}(q) on j in [lo, hi()].
struct AxisWeights {
  Index n = 0;
  Index lo = 1;
  std::vector<double> values;
  double norm_sq = 0.0;

  Index hi() const { return lo + static_cast<Index>(values.size()) - 1; }
  double at(Index j) const;
  double norm() const;
};

/// One pass of prefix sums over the coefficients, O(n + radius). n = 0 gives the empty table.
AxisWeights axis_weight_table(const AxisKernel& kernel, Index n);

/// c_{n,k}(q) = (1/l) sum_{j = kl+1}^{kl+l} b_{n,j}(q) for every block meeting the support.
struct AxisBlocks {
  Index l = 1;
  Index k_lo = 0;
  std::vector<double> values;
  double norm_sq = 0.0;

  Index k_hi() const { return k_lo + static_cast<Index>(values.size()) - 1; }
  double at(Index k) const;
};

AxisBlocks axis_block_averages(const AxisWeights& weights, Index l);

/// sum_j b_j(q) b'_j(q), the per-axis factor of sum_j b_{n,j} b_{n',j}.
double weight_inner_product(const AxisWeights& a, const AxisWeights& b);

class WeightTable {
 public:
  WeightTable(const ProductKernel& kernel, std::span<const Index> n);
  explicit WeightTable(std::vector<AxisWeights> axes);

  std::size_t dim() const { return axes_.size(); }
  const AxisWeights& axis(std::size_t q) const { return axes_[q]; }
  std::vector<Index> n() const;

  /// b_{n,j} = prod_q b_{n,j}(q).
  double weight(std::span<const Index> j) const;
  double norm_sq() const;
  double norm() const;
  Box support() const;

  bool has_blocks() const { return !blocks_.empty(); }
  Index block_len() const { return block_len_; }
  const AxisBlocks& blocks(std::size_t q) const { return blocks_[q]; }
  /// c_{n,k} = prod_q c_{n,k}(q).
  double block_average(std::span<const Index> k) const;
  double block_norm_sq() const;
  double block_norm() const;
  Box block_support() const;

  void attach_blocks(Index l);

 private:
  std::vector<AxisWeights> axes_;
  std::vector<AxisBlocks> blocks_;
  Index block_len_ = 0;
};

/// Returns the table with per-axis block averages over blocks of side l attached.
WeightTable block_averages(WeightTable table, Index l);

struct RegularityStats {
  double cs1 = 0.0;
  double cs2 = 0.0;
  double cs3 = 0.0;
  /// l^d c_n^2 / b_n^2, which tends to 1 under the second regularity condition.
  double block_mass_ratio = 0.0;
};

/// Exact evaluation over the finite support. cs1 and cs3 factorize over axes;
/// cs2 is evaluated by enumerating all but the last axis and resolving the
/// absolute value on the last axis through a sorted ratio sweep.
RegularityStats regularity_stats(const WeightTable& table, Index l);

/// b^2_{floor(s n)}(q) / b^2_n(q).
double scaling_ratio(const AxisKernel& kernel, Index n, double s);

}  // namespace fbslab::kernels
