#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fbslab/lattice.hpp"
#include "fbslab/rng.hpp"

namespace fbslab::innovations {

/// Mean zero, unit variance.
enum class NoiseLaw { StandardGaussian, Rademacher, CenteredExponential };

std::string noise_name(NoiseLaw law);
NoiseLaw noise_from_name(const std::string& name);

/// Fills `out` in order from `engine`. Callers rely on the order for reproducibility.
void fill_noise(NoiseLaw law, Engine& engine, std::span<double> out);

/// ||eps_0 - eps*_0||_p for two independent copies, in closed form.
double noise_difference_norm(NoiseLaw law, double p);

/// All links are 1-Lipschitz.
enum class Link { Linear, Abs, Tanh };

std::string link_name(Link link);
Link link_from_name(const std::string& name);
double apply_link(Link link, double v);

struct FilterTap {
  MultiIndex offset;
  double weight = 0.0;
};

/// X_i = g(sum_j psi_j eps_{i-j}) - centering.
class InnovationModel {
 public:
  InnovationModel(Field filter, Link link, NoiseLaw noise);
  static InnovationModel from_taps(std::size_t dim, const std::vector<FilterTap>& taps, Link link, NoiseLaw noise);
  /// psi = delta_0, linear link.
  static InnovationModel iid(std::size_t dim, NoiseLaw noise);

  std::size_t dim() const { return filter_.dim(); }
  const Field& filter() const { return filter_; }
  Link link() const { return link_; }
  NoiseLaw noise() const { return noise_; }
  double centering() const { return centering_; }
  double lipschitz_constant() const { return 1.0; }
  bool is_linear() const { return link_ == Link::Linear; }

  /// max |offset| over nonzero taps.
  Index filter_radius() const;
  double filter_sum() const;
  double filter_abs_sum() const;
  double filter_sq_sum() const;
  /// Noise sites feeding X_i for i in `region`.
  Box noise_box(const Box& region) const;

  double realize(double linear_value) const { return apply_link(link_, linear_value) - centering_; }

  std::string describe() const;
  /// FNV-1a over describe().
  std::uint64_t hash() const;

 private:
  Field filter_;
  Link link_;
  NoiseLaw noise_;
  double centering_ = 0.0;
};

/// Noise over `box`, row-major, from stream kField of `seed`.
Field draw_noise(NoiseLaw law, const Box& box, std::uint64_t seed);
/// X on `region` from a noise field covering model.noise_box(region).
Field realize(const InnovationModel& model, const Field& noise, const Box& region,
              ConvolutionMethod method = ConvolutionMethod::Auto);
Field sample_field(const InnovationModel& model, const Box& region, std::uint64_t seed,
                   ConvolutionMethod method = ConvolutionMethod::Auto);

struct CoupledSample {
  Field x;
  Field x_star;
  Field noise;
  Field noise_star;
};

/// X and X* share every noise value except the one at site 0.
CoupledSample coupled_pair(const InnovationModel& model, const Box& region, std::uint64_t seed);

struct DependenceSummary {
  double p = 2.0;
  double delta_p = 0.0;
  double std_error = 0.0;
  double sigma_sq = 0.0;
  bool is_exact = false;
  std::string warning;
};

/// Linear link: (sum |psi|) ||eps - eps*||_p exactly. Otherwise Monte Carlo over the
/// finite support with a bootstrap standard error; a warning is set when the relative
/// error exceeds 5%.
DependenceSummary dependence_measure(const InnovationModel& model, double p, std::int64_t trials,
                                     std::uint64_t seed);

struct LongRunVariance {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = false;
  bool degenerate = false;
};

/// Linear link: (sum psi)^2. Otherwise batch Monte Carlo of sum_k E X_0 X_k over the lags
/// where the covariance can be nonzero.
LongRunVariance long_run_variance(const InnovationModel& model, std::uint64_t seed = 0, std::int64_t batches = 200,
                                  Index batch_side = 0);

/// Restricts psi to {-floor(m/2), ..., floor(m/2)}^d. Linear link only.
InnovationModel m_truncate(const InnovationModel& model, Index m);
/// ||X_0 - Xbar_0||_2 for the m-truncation (linear link).
double approximation_error(const InnovationModel& model, Index m);

/// E X_0 X_k for the linear link: sum_j psi_j psi_{j+k}.
Field filter_autocorrelation(const Field& filter);

struct FieldMetadata {
  Box region;
  std::uint64_t seed = 0;
  std::uint64_t model_hash = 0;
};

/// Writes <stem>.bin (row-major little-endian f64) and <stem>.json.
void write_field(const std::filesystem::path& stem, const Field& field, const FieldMetadata& meta);
Field read_field(const std::filesystem::path& stem, FieldMetadata* meta = nullptr);

std::uint64_t fnv1a(std::string_view text);

}  // namespace fbslab::innovations
