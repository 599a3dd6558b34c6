#include "fbslab/sums.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <limits>
#include <array>
#include <map>
#include <tuple>

#include "fbslab/errors.hpp"
#include "fbslab/rng.hpp"

namespace fbslab::sums {

using innovations::InnovationModel;
using kernels::AxisWeights;
using kernels::ProductKernel;
using kernels::WeightTable;

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// Contracts x against per-axis weight families: result[u_0, ..., u_{d-1}] =
/// sum_j x(j) prod_q w[q][u_q][j_q - lo_q]. Axes are eliminated from the last one.
std::vector<double> contract(const Field& x, const std::vector<std::vector<std::vector<double>>>& w) {
  const std::size_t d = x.dim();
  std::vector<std::size_t> extent(d), count(d);
  for (std::size_t q = 0; q < d; ++q) {
    extent[q] = static_cast<std::size_t>(x.box().extent(q));
    count[q] = w[q].size();
    if (count[q] == 0) return {};
  }
  std::vector<double> cur(x.values().begin(), x.values().end());
  std::size_t inner = 1;
  for (std::size_t a = d; a-- > 0;) {
    std::size_t outer = 1;
    for (std::size_t q = 0; q < a; ++q) outer *= extent[q];
    const std::size_t mid = extent[a], nu = count[a];
    std::vector<double> next(outer * nu * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t xi = 0; xi < mid; ++xi) {
        const double* src = cur.data() + (o * mid + xi) * inner;
        for (std::size_t u = 0; u < nu; ++u) {
          const double wt = w[a][u][xi];
          if (wt == 0.0) continue;
          double* dst = next.data() + (o * nu + u) * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += wt * src[i];
        }
      }
    cur.swap(next);
    inner *= nu;
  }
  return cur;
}

/// Copies src into dst on their overlap (dst must contain src), row by row.
void embed(const Field& src, Field& dst) {
  const std::size_t d = src.dim();
  const Box& b = src.box();
  if (b.empty()) return;
  const auto row = static_cast<std::size_t>(b.extent(d - 1));
  Box rows = b;
  rows.hi[d - 1] = rows.lo[d - 1];
  for_each_index(rows, [&](std::span<const Index> j) {
    const double* s = &src.values()[src.offset(j)];
    double* t = &dst.values()[dst.offset(j)];
    std::copy(s, s + row, t);
  });
}

std::vector<std::pair<MultiIndex, double>> filter_taps(const Field& filter) {
  std::vector<std::pair<MultiIndex, double>> taps;
  for_each_index(filter.box(), [&](std::span<const Index> m) {
    if (filter(m) != 0.0) taps.emplace_back(MultiIndex(m.begin(), m.end()), filter(m));
  });
  return taps;
}

/// sum_{k in [lo, hi]} a(k + s) b(k + t)
double shifted_inner(const AxisWeights& a, const AxisWeights& b, Index lo, Index hi, Index s, Index t) {
  if (a.values.empty() || b.values.empty()) return 0.0;
  lo = std::max({lo, a.lo - s, b.lo - t});
  hi = std::min({hi, a.hi() - s, b.hi() - t});
  long double acc = 0.0L;
  for (Index k = lo; k <= hi; ++k) acc += static_cast<long double>(a.at(k + s)) * b.at(k + t);
  return static_cast<double>(acc);
}

}  // namespace

Box lattice_box(std::span<const Index> n) {
  MultiIndex lo(n.size(), 1), hi(n.begin(), n.end());
  return Box(lo, hi);
}

Box weight_support(const ProductKernel& kernel, std::span<const Index> n) {
  if (n.size() != kernel.dim()) throw std::invalid_argument("weight_support: dimension mismatch");
  MultiIndex lo(n.size()), hi(n.size());
  for (std::size_t q = 0; q < n.size(); ++q) {
    lo[q] = 1 - kernel.axis(q).hi();
    hi[q] = n[q] - kernel.axis(q).lo();
  }
  return Box(lo, hi);
}

Field linear_field(const ProductKernel& kernel, const Field& x, std::span<const Index> n, ConvolutionMethod method) {
  const std::size_t d = kernel.dim();
  if (x.dim() != d || n.size() != d) throw std::invalid_argument("linear_field: dimension mismatch");
  const Box need = weight_support(kernel, n);
  if (!x.box().contains(need))
    throw std::invalid_argument("linear_field: dimension mismatch, innovation region " + x.box().to_string() +
                                " does not cover " + need.to_string());
  Field cur = x;
  Box out = need;
  for (std::size_t q = 0; q < d; ++q) {
    out.lo[q] = 1;
    out.hi[q] = n[q];
    const auto& ax = kernel.axis(q);
    cur = convolve_axis(cur, q, ax.coefficients(), ax.lo(), out, method);
  }
  return cur;
}

std::vector<Index> scaled_corner(std::span<const Index> n, const Point& t) {
  if (t.size() != n.size()) throw std::invalid_argument("grid point has wrong dimension");
  std::vector<Index> m(n.size());
  for (std::size_t q = 0; q < n.size(); ++q) {
    if (!(t[q] >= 0.0 && t[q] <= 1.0)) throw std::invalid_argument("grid points must lie in [0,1]^d");
    m[q] = scaled_index(n[q], t[q]);
  }
  return m;
}

PartialSumProcess partial_sum_process(const Field& xi, const std::vector<Point>& t_grid, double normalizer) {
  const Box& b = xi.box();
  for (Index v : b.lo)
    if (v != 1) throw std::invalid_argument("partial_sum_process: xi must live on {1..n_1} x ... x {1..n_d}");
  PartialSumProcess out;
  out.n = b.hi;
  out.t = t_grid;
  out.normalizer = normalizer;
  Field cum = xi;
  inclusive_prefix_sums(cum);
  for (const auto& t : t_grid) {
    const auto m = scaled_corner(out.n, t);
    const bool zero = std::any_of(m.begin(), m.end(), [](Index v) { return v == 0; });
    out.values.push_back(zero ? 0.0 : cum(m));
  }
  return out;
}

PartialSumSampler::PartialSumSampler(const ProductKernel& kernel, const InnovationModel& model, std::vector<Index> n,
                                     std::vector<Point> t_grid, SamplerOptions options)
    : kernel_(kernel), model_(model), n_(std::move(n)), t_(std::move(t_grid)) {
  const std::size_t d = kernel_.dim();
  if (model_.dim() != d) throw ConfigError("innovations.filter", "filter dimension differs from kernel dimension");
  if (n_.size() != d) throw ConfigError("n", "n must have one entry per axis");
  for (Index v : n_)
    if (v < 1) throw ConfigError("n", "every n_q must be >= 1");
  if (t_.empty()) throw ConfigError("t_grid", "grid must be non-empty");
  for (const auto& t : t_) corners_.push_back(scaled_corner(n_, t));

  normalizer_ = WeightTable(kernel_, n_).norm();
  support_ = weight_support(kernel_, n_);
  const Box full_noise = model_.noise_box(support_);
  const double field_bytes = 3.0 * 8.0 * static_cast<double>(full_noise.volume());

  route_ = options.route;
  if (route_ == SamplerRoute::Auto)
    route_ = field_bytes <= static_cast<double>(options.budget_bytes) ? SamplerRoute::Field : SamplerRoute::Weights;
  if (route_ == SamplerRoute::Field) {
    if (field_bytes > static_cast<double>(options.budget_bytes))
      throw ConfigError("budget_mb", "field route needs " + std::to_string(field_bytes / 1048576.0) +
                                         " MB for region " + full_noise.to_string());
    noise_box_ = full_noise;
  }
  if (model_.is_linear() || route_ == SamplerRoute::Weights) setup_weights_route(options);
}

void PartialSumSampler::setup_weights_route(const SamplerOptions& options) {
  const std::size_t d = kernel_.dim();
  const Box full_noise = model_.noise_box(support_);
  const Box fbox = model_.filter().box();

  // Per-axis weight tables for each distinct positive corner coordinate.
  unique_.assign(d, {});
  for (std::size_t q = 0; q < d; ++q) {
    for (const auto& c : corners_)
      if (c[q] > 0) unique_[q].push_back(c[q]);
    std::sort(unique_[q].begin(), unique_[q].end());
    unique_[q].erase(std::unique(unique_[q].begin(), unique_[q].end()), unique_[q].end());
  }
  slot_.clear();
  for (const auto& c : corners_) {
    std::vector<std::size_t> s(d, npos);
    for (std::size_t q = 0; q < d; ++q)
      if (c[q] > 0)
        s[q] = static_cast<std::size_t>(std::lower_bound(unique_[q].begin(), unique_[q].end(), c[q]) - unique_[q].begin());
    slot_.push_back(std::move(s));
  }
  std::vector<std::vector<AxisWeights>> tables(d);
  for (std::size_t q = 0; q < d; ++q)
    for (Index u : unique_[q]) tables[q].push_back(kernels::axis_weight_table(kernel_.axis(q), u));

  const std::size_t p = t_.size();
  const auto taps = filter_taps(model_.filter());
  auto cov_over = [&](const Box& noise) {
    // Cov(S(t_a), S(t_b)) restricted to noise in `noise`: sum_k w_a(k) w_b(k) with
    // w_a(k) = sum_m psi_m b_{t_a}(k + m); separable once the tap pair is fixed.
    std::vector<double> c(p * p, 0.0);
    std::vector<std::map<std::tuple<std::size_t, std::size_t, Index, Index>, double>> cache(d);
    for (const auto& [ma, wa] : taps)
      for (const auto& [mb, wb] : taps)
        for (std::size_t a = 0; a < p; ++a)
          for (std::size_t b = a; b < p; ++b) {
            double prod = wa * wb;
            for (std::size_t q = 0; q < d && prod != 0.0; ++q) {
              const std::size_t ua = slot_[a][q], ub = slot_[b][q];
              if (ua == npos || ub == npos) {
                prod = 0.0;
                break;
              }
              const auto key = std::make_tuple(ua, ub, ma[q], mb[q]);
              auto it = cache[q].find(key);
              if (it == cache[q].end())
                it = cache[q].emplace(key, shifted_inner(tables[q][ua], tables[q][ub], noise.lo[q], noise.hi[q], ma[q], mb[q])).first;
              prod *= it->second;
            }
            c[a * p + b] += prod;
          }
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < a; ++b) c[a * p + b] = c[b * p + a];
    return c;
  };

  if (model_.is_linear()) exact_cov_ = cov_over(full_noise);
  if (route_ != SamplerRoute::Weights) return;

  MultiIndex lo(d), hi(d);
  for (std::size_t q = 0; q < d; ++q) {
    const Index margin = options.near_margin < 0 ? n_[q] : options.near_margin;
    lo[q] = std::max(support_.lo[q], 1 - margin);
    hi[q] = std::min(support_.hi[q], n_[q] + margin);
  }
  const Box near_x(lo, hi);
  noise_box_ = near_x.minkowski_sum(fbox.reflected()).intersect(full_noise);
  x_box_ = noise_box_.minkowski_sum(fbox).intersect(support_);
  const Box padded = model_.noise_box(x_box_);
  const double bytes = 8.0 * static_cast<double>(padded.volume() + x_box_.volume());
  if (bytes > static_cast<double>(options.budget_bytes))
    throw ConfigError("budget_mb", "near box " + noise_box_.to_string() + " needs " + std::to_string(bytes / 1048576.0) + " MB");

  const bool full = noise_box_ == full_noise;
  const bool gaussian_linear = model_.is_linear() && model_.noise() == innovations::NoiseLaw::StandardGaussian;
  if (!full && !model_.is_linear())
    throw ConfigError("kernel.max_radius",
                      "weight support " + support_.to_string() +
                          " does not fit the budget and a nonlinear link cannot be simulated on a partial box");
  if (!full && options.far_field && !gaussian_linear)
    throw ConfigError("kernel.max_radius", "weight support " + support_.to_string() +
                                               " does not fit the budget; far-field aggregation needs Gaussian noise");

  w_.assign(d, {});
  for (std::size_t q = 0; q < d; ++q)
    for (const auto& t : tables[q]) {
      std::vector<double> v(static_cast<std::size_t>(x_box_.extent(q)));
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = t.at(x_box_.lo[q] + static_cast<Index>(k));
      w_[q].push_back(std::move(v));
    }

  far_active_ = !full && options.far_field;
  if (!far_active_) return;
  const std::vector<double> near = cov_over(noise_box_);
  Eigen::MatrixXd c(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = exact_cov_[a * p + b] - near[a * p + b];
  for (std::size_t a = 0; a < p; ++a)
    if (exact_cov_[a * p + a] > 0.0)
      far_fraction_ = std::max(far_fraction_, c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) / exact_cov_[a * p + a]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success) throw NumericError("far-field covariance eigen-decomposition failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd factor = eig.eigenvectors() * root.asDiagonal();
  far_factor_.resize(p * p);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) far_factor_[a * p + b] = factor(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
}

std::vector<double> PartialSumSampler::sample(std::uint64_t replica_seed) const {
  return route_ == SamplerRoute::Field ? sample_field_route(replica_seed) : sample_weights_route(replica_seed);
}

std::vector<double> PartialSumSampler::sample_field_route(std::uint64_t seed) const {
  const Field noise = innovations::draw_noise(model_.noise(), noise_box_, seed);
  const Field x = innovations::realize(model_, noise, support_);
  const Field xi = linear_field(kernel_, x, n_);
  return partial_sum_process(xi, t_).values;
}

std::vector<double> PartialSumSampler::sample_weights_route(std::uint64_t seed) const {
  const std::size_t d = kernel_.dim();
  const Field noise = innovations::draw_noise(model_.noise(), noise_box_, seed);
  const Box padded_box = model_.noise_box(x_box_);
  Field x;
  if (padded_box == noise_box_) {
    x = innovations::realize(model_, noise, x_box_);
  } else {
    Field padded(padded_box);
    embed(noise, padded);
    x = innovations::realize(model_, padded, x_box_);
  }
  const std::vector<double> tensor = contract(x, w_);
  std::vector<double> out(t_.size(), 0.0);
  for (std::size_t a = 0; a < t_.size(); ++a) {
    std::size_t flat = 0;
    bool zero = tensor.empty();
    for (std::size_t q = 0; q < d && !zero; ++q) {
      if (slot_[a][q] == npos) zero = true;
      else flat = flat * unique_[q].size() + slot_[a][q];
    }
    if (!zero) out[a] = tensor[flat];
  }
  if (far_active_) {
    const std::size_t p = t_.size();
    Engine engine = make_engine(seed, streams::kFarField, 0);
    boost::random::normal_distribution<double> normal;
    std::vector<double> z(p);
    for (double& v : z) v = normal(engine);
    for (std::size_t a = 0; a < p; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < p; ++b) s += far_factor_[a * p + b] * z[b];
      out[a] += s;
    }
  }
  return out;
}

BlockingDiagnostics blocking_decomposition(const ProductKernel& kernel, const InnovationModel& model,
                                           std::span<const Index> n, Index m, Index l, std::int64_t replicas,
                                           std::uint64_t seed, std::size_t budget_bytes) {
  if (m < 0) throw ConfigError("m", "m must be >= 0");
  if (l <= m + 1) throw ConfigError("l", "invalid blocking: need l > m + 1, got l = " + std::to_string(l) + ", m = " + std::to_string(m));
  if (replicas < 2) throw ConfigError("replicas", "need at least 2 replicas");
  const std::size_t d = kernel.dim();
  if (n.size() != d || model.dim() != d) throw ConfigError("n", "dimension mismatch between n, kernel and filter");
  const InnovationModel bar = innovations::m_truncate(model, m);

  WeightTable table(kernel, n);
  table.attach_blocks(l);
  const double bn = table.norm();
  if (!(bn > 0.0)) throw NumericError("blocking_decomposition: b_n = 0");

  MultiIndex lo(d), hi(d);
  for (std::size_t q = 0; q < d; ++q) {
    lo[q] = table.blocks(q).k_lo * l + 1;
    hi[q] = (table.blocks(q).k_hi() + 1) * l;
  }
  const Box region(lo, hi);
  const Box noise_box = model.noise_box(region);
  const double bytes = 8.0 * static_cast<double>(noise_box.volume() + 2 * region.volume());
  if (bytes > static_cast<double>(budget_bytes))
    throw ConfigError("budget_mb", "blocking region " + region.to_string() + " needs " + std::to_string(bytes / 1048576.0) + " MB");

  // Weights over the block-aligned region: b, the block average c_{k(j)}, and c restricted to
  // the interior sub-blocks of side l - m - 1.
  std::vector<std::vector<std::vector<double>>> w(d, std::vector<std::vector<double>>(3));
  for (std::size_t q = 0; q < d; ++q) {
    const auto& ax = table.axis(q);
    const auto& bl = table.blocks(q);
    for (Index j = lo[q]; j <= hi[q]; ++j) {
      const Index k = (j - 1 - ((j - 1) % l + l) % l) / l;
      const Index pos = j - 1 - k * l;
      const double c = bl.at(k);
      w[q][0].push_back(ax.at(j));
      w[q][1].push_back(c);
      w[q][2].push_back(pos < l - m - 1 ? c : 0.0);
    }
  }

  std::vector<std::array<double, 3>> per(static_cast<std::size_t>(replicas));
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t r = 0; r < replicas; ++r) {
    const auto rs = derive_seed(seed, streams::kBlocking, static_cast<std::uint64_t>(r));
    const Field noise = innovations::draw_noise(model.noise(), noise_box, rs);
    const Field x = innovations::realize(model, noise, region);
    const Field xb = innovations::realize(bar, noise, region);
    const auto sx = contract(x, w);    // (b|c|inner)^d combos; only the diagonal ones are used
    const auto sxb = contract(xb, w);
    std::size_t all_b = 0, all_c = 0, all_in = 0;
    for (std::size_t q = 0; q < d; ++q) {
      all_b = all_b * 3 + 0;
      all_c = all_c * 3 + 1;
      all_in = all_in * 3 + 2;
    }
    per[static_cast<std::size_t>(r)] = {sx[all_b] - sxb[all_b], sxb[all_b] - sxb[all_c], sxb[all_c] - sxb[all_in]};
  }

  BlockingDiagnostics out;
  out.m = m;
  out.l = l;
  out.replicas = replicas;
  std::array<double, 3> err{}, se{};
  for (int e = 0; e < 3; ++e) {
    long double s1 = 0.0L, s2 = 0.0L;
    for (const auto& v : per) {
      const long double sq = static_cast<long double>(v[e] / bn) * (v[e] / bn);
      s1 += sq;
      s2 += sq * sq;
    }
    const auto rr = static_cast<long double>(replicas);
    const long double mean = s1 / rr;
    const long double var = std::max(0.0L, (s2 / rr - mean * mean) / (rr - 1.0L));
    err[e] = std::sqrt(static_cast<double>(mean));
    se[e] = err[e] > 0.0 ? std::sqrt(static_cast<double>(var)) / (2.0 * err[e]) : 0.0;
  }
  out.error_ma = err[0];
  out.error_avg = err[1];
  out.error_blk = err[2];
  out.se_ma = se[0];
  out.se_avg = se[1];
  out.se_blk = se[2];
  out.sigma_ml = sigma_ml(model, m, l);
  const double ld = std::pow(static_cast<double>(l), static_cast<double>(d));
  const double shrink = 1.0 - std::pow(static_cast<double>(l - m - 1) / static_cast<double>(l), static_cast<double>(d));
  const double delta_bar = bar.filter_abs_sum() * innovations::noise_difference_norm(model.noise(), 2.0);
  out.blk_bound = std::sqrt(2.0 * 2.0 * shrink * ld * table.block_norm_sq()) * delta_bar / bn;
  return out;
}

double sigma_ml(const InnovationModel& model, Index m, Index l) {
  if (m < 0) throw ConfigError("m", "m must be >= 0");
  if (l <= m + 1) throw ConfigError("l", "invalid blocking: need l > m + 1, got l = " + std::to_string(l) + ", m = " + std::to_string(m));
  const InnovationModel bar = innovations::m_truncate(model, m);
  const Field r = innovations::filter_autocorrelation(bar.filter());
  const std::size_t d = model.dim();
  const Box range = Box::cube(d, m + 1 - l, l - m - 1).intersect(r.box());
  long double acc = 0.0L;
  for_each_index(range, [&](std::span<const Index> i) {
    long double w = r(i);
    for (std::size_t q = 0; q < d; ++q)
      w *= 1.0L - static_cast<long double>(m + 1 + std::abs(i[q])) / static_cast<long double>(l);
    acc += w;
  });
  return static_cast<double>(acc);
}

}  // namespace fbslab::sums
