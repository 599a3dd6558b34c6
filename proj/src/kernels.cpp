#include "fbslab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "fbslab/errors.hpp"

namespace fbslab::kernels {

namespace {

Index floor_div(Index a, Index b) {
  Index q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

void check_policy(const TruncationPolicy& p) {
  if (!(p.tail_tol > 0.0) || !(p.tail_tol < 1.0)) throw ConfigError("tail_tol", "must lie in (0, 1)");
  if (p.max_radius < 1) throw ConfigError("max_radius", "must be >= 1");
}

}  // namespace

std::string family_name(Family family) {
  switch (family) {
    case Family::FractionalGamma: return "fractional_gamma";
    case Family::DifferencedPower: return "differenced_power";
    case Family::RegularlyVarying: return "regularly_varying";
    case Family::LogCorrected: return "log_corrected";
    case Family::Identity: return "identity";
    case Family::FiniteSupport: return "finite_support";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  for (const auto& info : family_catalogue())
    if (info.name == name) return info.family;
  throw ConfigError("family", "unknown kernel family '" + name + "'");
}

const std::vector<FamilyInfo>& family_catalogue() {
  static const std::vector<FamilyInfo> catalogue = {
      {Family::FractionalGamma, "fractional_gamma", "alpha in (0, 1/2)", "H = alpha + 1/2"},
      {Family::DifferencedPower, "differenced_power", "alpha in (0, 1/2)", "H = 1/2 - alpha"},
      {Family::RegularlyVarying, "regularly_varying", "alpha in (1/2, 1), optional log_power", "H = 3/2 - alpha"},
      {Family::LogCorrected, "log_corrected", "alpha > 1/2", "H = 1 (scaling check only)"},
      {Family::Identity, "identity", "none", "H = 1/2"},
      {Family::FiniteSupport, "finite_support", "taps (list of reals), first index", "H = 1/2"},
  };
  return catalogue;
}

template <class Next, class Tail>
AxisKernel AxisKernel::truncated(Family family, double alpha, double hurst, const TruncationPolicy& policy,
                                 Next&& next, Tail&& tail) {
  check_policy(policy);
  AxisKernel k;
  k.family_ = family;
  k.alpha_ = alpha;
  k.hurst_ = hurst;
  k.lo_ = 0;
  long double partial = 0.0L;
  double tail_est = 0.0;
  for (Index i = 0;; ++i) {
    const double a = next(i);
    k.coeffs_.push_back(a);
    partial += static_cast<long double>(a) * a;
    if (i >= 1) {
      tail_est = tail(i, a);
      if (tail_est <= policy.tail_tol * static_cast<double>(partial + tail_est)) break;
    }
    if (i >= policy.max_radius) {
      k.capped_ = true;
      break;
    }
  }
  k.tail_fraction_ = tail_est / static_cast<double>(partial + tail_est);
  return k;
}

AxisKernel AxisKernel::fractional_gamma(double alpha, const TruncationPolicy& policy) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw ConfigError("alpha", "fractional_gamma requires alpha in (0, 1/2), got " + fmt_num(alpha));
  double prev = 1.0;
  auto next = [&](Index i) {
    if (i > 0) prev *= (static_cast<double>(i) - 1.0 + alpha) / static_cast<double>(i);
    return prev;
  };
  // a_i ~ i^(alpha-1)/Gamma(alpha): squared tail ~ a_R^2 R / (1 - 2 alpha).
  auto tail = [&](Index r, double a) { return a * a * static_cast<double>(r) / (1.0 - 2.0 * alpha); };
  return truncated(Family::FractionalGamma, alpha, alpha + 0.5, policy, next, tail);
}

AxisKernel AxisKernel::differenced_power(double alpha, const TruncationPolicy& policy) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw ConfigError("alpha", "differenced_power requires alpha in (0, 1/2), got " + fmt_num(alpha));
  auto next = [&](Index i) {
    if (i == 0) return 1.0;
    const double x = static_cast<double>(i);
    return std::pow(x, -alpha) * std::expm1(-alpha * std::log1p(1.0 / x));
  };
  // The coefficients sum to zero and b_n is carried by the partial sums (k+1)^-alpha, so a radius
  // chosen from the squared tail alone (~1e3) would cut b_n badly. Run to the cap instead.
  auto never = [](Index, double) { return std::numeric_limits<double>::quiet_NaN(); };
  AxisKernel k = truncated(Family::DifferencedPower, alpha, 0.5 - alpha, policy, next, never);
  const double a_r = k.coeffs_.back();
  const double r = static_cast<double>(k.hi());
  const double tail = a_r * a_r * r / (2.0 * alpha + 1.0);
  long double mass = 0.0L;
  for (double c : k.coeffs_) mass += static_cast<long double>(c) * c;
  k.tail_fraction_ = tail / static_cast<double>(mass + tail);
  return k;
}

AxisKernel AxisKernel::regularly_varying(double alpha, double log_power, const TruncationPolicy& policy) {
  if (!(alpha > 0.5 && alpha < 1.0))
    throw ConfigError("alpha", "regularly_varying requires alpha in (1/2, 1), got " + fmt_num(alpha));
  const double e = 1.0 - alpha;
  auto next = [&](Index i) {
    const double x = static_cast<double>(i);
    const double base = i == 0 ? 1.0 / e : std::pow(x, e) * std::expm1(e * std::log1p(1.0 / x)) / e;
    return log_power == 0.0 ? base : base * std::pow(std::log(std::exp(1.0) + x), log_power);
  };
  auto tail = [&](Index r, double a) { return a * a * static_cast<double>(r) / (2.0 * alpha - 1.0); };
  AxisKernel k = truncated(Family::RegularlyVarying, alpha, 1.5 - alpha, policy, next, tail);
  k.log_power_ = log_power;
  return k;
}

AxisKernel AxisKernel::log_corrected(double alpha, const TruncationPolicy& policy) {
  if (!(alpha > 0.5)) throw ConfigError("alpha", "log_corrected requires alpha > 1/2, got " + fmt_num(alpha));
  auto next = [&](Index i) {
    if (i == 0) return 1.0;
    const double x = static_cast<double>(i);
    return std::pow(x, -0.5) * std::pow(std::log1p(x), -alpha);
  };
  // sum_{i>R} 1/(i log^{2 alpha} i) ~ log(R)^{1-2alpha}/(2 alpha - 1) = a_R^2 R log(R) / (2 alpha - 1).
  auto tail = [&](Index r, double a) {
    const double x = static_cast<double>(r);
    return a * a * x * std::log1p(x) / (2.0 * alpha - 1.0);
  };
  return truncated(Family::LogCorrected, alpha, 1.0, policy, next, tail);
}

AxisKernel AxisKernel::identity() {
  AxisKernel k;
  k.family_ = Family::Identity;
  k.hurst_ = 0.5;
  k.lo_ = 0;
  k.coeffs_ = {1.0};
  return k;
}

AxisKernel AxisKernel::finite_support(std::vector<double> taps, Index first) {
  if (taps.empty()) throw ConfigError("taps", "finite_support needs at least one tap");
  for (double t : taps)
    if (!std::isfinite(t)) throw ConfigError("taps", "finite_support taps must be finite");
  AxisKernel k;
  k.family_ = Family::FiniteSupport;
  k.hurst_ = 0.5;
  k.lo_ = first;
  k.coeffs_ = std::move(taps);
  return k;
}

double AxisKernel::coeff(Index i) const {
  if (i < lo_ || i > hi()) return 0.0;
  return coeffs_[static_cast<std::size_t>(i - lo_)];
}

Index AxisKernel::truncation_radius() const { return std::max(std::abs(lo_), std::abs(hi())); }

std::string AxisKernel::name() const {
  switch (family_) {
    case Family::Identity: return "identity";
    case Family::FiniteSupport: {
      std::string s = "finite_support[";
      for (std::size_t k = 0; k < coeffs_.size(); ++k) s += (k ? "," : "") + fmt_num(coeffs_[k]);
      return s + "]@" + std::to_string(lo_);
    }
    case Family::RegularlyVarying:
      if (log_power_ != 0.0) return family_name(family_) + "(" + fmt_num(alpha_) + ",log^" + fmt_num(log_power_) + ")";
      [[fallthrough]];
    default: return family_name(family_) + "(" + fmt_num(alpha_) + ")";
  }
}

ProductKernel::ProductKernel(std::vector<AxisKernel> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw ConfigError("kernel.axes", "product kernel needs at least one axis");
}

double ProductKernel::coeff(std::span<const Index> i) const {
  double v = 1.0;
  for (std::size_t q = 0; q < axes_.size(); ++q) {
    v *= axes_[q].coeff(i[q]);
    if (v == 0.0) return 0.0;
  }
  return v;
}

std::vector<double> ProductKernel::hurst() const {
  std::vector<double> h;
  for (const auto& a : axes_) h.push_back(a.declared_hurst());
  return h;
}

bool ProductKernel::fbs_eligible() const {
  return std::all_of(axes_.begin(), axes_.end(), [](const AxisKernel& a) { return a.fbs_eligible(); });
}

Box ProductKernel::support() const {
  MultiIndex lo, hi;
  for (const auto& a : axes_) {
    lo.push_back(a.lo());
    hi.push_back(a.hi());
  }
  return Box(lo, hi);
}

std::string ProductKernel::name() const {
  std::string s;
  for (std::size_t q = 0; q < axes_.size(); ++q) s += (q ? " x " : "") + axes_[q].name();
  return s;
}

double AxisWeights::at(Index j) const {
  if (j < lo || j > hi()) return 0.0;
  return values[static_cast<std::size_t>(j - lo)];
}

double AxisWeights::norm() const { return std::sqrt(norm_sq); }

AxisWeights axis_weight_table(const AxisKernel& kernel, Index n) {
  if (n < 0) throw std::invalid_argument("axis_weight_table: n must be >= 0");
  AxisWeights w;
  w.n = n;
  if (n == 0) return w;
  const auto a = kernel.coefficients();
  const auto len = static_cast<Index>(a.size());
  std::vector<long double> prefix(a.size() + 1, 0.0L);
  for (std::size_t k = 0; k < a.size(); ++k) prefix[k + 1] = prefix[k] + a[k];
  // P(m) = sum_{i <= m} a_i.
  auto P = [&](Index m) {
    const Index pos = std::clamp<Index>(m - kernel.lo() + 1, 0, len);
    return prefix[static_cast<std::size_t>(pos)];
  };
  w.lo = 1 - kernel.hi();
  const Index hi = n - kernel.lo();
  w.values.resize(static_cast<std::size_t>(hi - w.lo + 1));
  long double sq = 0.0L;
  for (Index j = w.lo; j <= hi; ++j) {
    const double b = static_cast<double>(P(n - j) - P(-j));
    w.values[static_cast<std::size_t>(j - w.lo)] = b;
    sq += static_cast<long double>(b) * b;
  }
  w.norm_sq = static_cast<double>(sq);
  return w;
}

double AxisBlocks::at(Index k) const {
  if (values.empty() || k < k_lo || k > k_hi()) return 0.0;
  return values[static_cast<std::size_t>(k - k_lo)];
}

AxisBlocks axis_block_averages(const AxisWeights& weights, Index l) {
  if (l < 1) throw std::invalid_argument("block length l must be >= 1");
  AxisBlocks c;
  c.l = l;
  if (weights.values.empty()) return c;
  c.k_lo = floor_div(weights.lo - 1, l);
  const Index k_hi = floor_div(weights.hi() - 1, l);
  c.values.resize(static_cast<std::size_t>(k_hi - c.k_lo + 1));
  long double sq = 0.0L;
  for (Index k = c.k_lo; k <= k_hi; ++k) {
    long double s = 0.0L;
    for (Index j = k * l + 1; j <= k * l + l; ++j) s += weights.at(j);
    const double avg = static_cast<double>(s / static_cast<long double>(l));
    c.values[static_cast<std::size_t>(k - c.k_lo)] = avg;
    sq += static_cast<long double>(avg) * avg;
  }
  c.norm_sq = static_cast<double>(sq);
  return c;
}

double weight_inner_product(const AxisWeights& a, const AxisWeights& b) {
  if (a.values.empty() || b.values.empty()) return 0.0;
  const Index lo = std::max(a.lo, b.lo);
  const Index hi = std::min(a.hi(), b.hi());
  long double s = 0.0L;
  for (Index j = lo; j <= hi; ++j) s += static_cast<long double>(a.at(j)) * b.at(j);
  return static_cast<double>(s);
}

WeightTable::WeightTable(const ProductKernel& kernel, std::span<const Index> n) {
  if (n.size() != kernel.dim()) throw std::invalid_argument("WeightTable: n has wrong dimension");
  for (std::size_t q = 0; q < kernel.dim(); ++q) axes_.push_back(axis_weight_table(kernel.axis(q), n[q]));
}

WeightTable::WeightTable(std::vector<AxisWeights> axes) : axes_(std::move(axes)) {}

std::vector<Index> WeightTable::n() const {
  std::vector<Index> r;
  for (const auto& a : axes_) r.push_back(a.n);
  return r;
}

double WeightTable::weight(std::span<const Index> j) const {
  double v = 1.0;
  for (std::size_t q = 0; q < axes_.size(); ++q) v *= axes_[q].at(j[q]);
  return v;
}

double WeightTable::norm_sq() const {
  double v = 1.0;
  for (const auto& a : axes_) v *= a.norm_sq;
  return v;
}

double WeightTable::norm() const { return std::sqrt(norm_sq()); }

Box WeightTable::support() const {
  MultiIndex lo, hi;
  for (const auto& a : axes_) {
    lo.push_back(a.lo);
    hi.push_back(a.hi());
  }
  return Box(lo, hi);
}

void WeightTable::attach_blocks(Index l) {
  blocks_.clear();
  for (const auto& a : axes_) blocks_.push_back(axis_block_averages(a, l));
  block_len_ = l;
}

double WeightTable::block_average(std::span<const Index> k) const {
  double v = 1.0;
  for (std::size_t q = 0; q < blocks_.size(); ++q) v *= blocks_[q].at(k[q]);
  return v;
}

double WeightTable::block_norm_sq() const {
  double v = 1.0;
  for (const auto& c : blocks_) v *= c.norm_sq;
  return v;
}

double WeightTable::block_norm() const { return std::sqrt(block_norm_sq()); }

Box WeightTable::block_support() const {
  MultiIndex lo, hi;
  for (const auto& c : blocks_) {
    lo.push_back(c.k_lo);
    hi.push_back(c.k_hi());
  }
  return Box(lo, hi);
}

WeightTable block_averages(WeightTable table, Index l) {
  table.attach_blocks(l);
  return table;
}

namespace {

// Per-axis arrays over the block-covered index range: b_j^2 and c_{k(j)}^2.
struct AxisSquares {
  std::vector<double> beta;
  std::vector<double> gamma;
};

AxisSquares axis_squares(const AxisWeights& w, const AxisBlocks& c) {
  AxisSquares s;
  if (c.values.empty()) return s;
  const Index j_lo = c.k_lo * c.l + 1;
  const Index j_hi = (c.k_hi() + 1) * c.l;
  s.beta.reserve(static_cast<std::size_t>(j_hi - j_lo + 1));
  s.gamma.reserve(static_cast<std::size_t>(j_hi - j_lo + 1));
  for (Index j = j_lo; j <= j_hi; ++j) {
    const double b = w.at(j);
    const double ck = c.at(floor_div(j - 1, c.l));
    s.beta.push_back(b * b);
    s.gamma.push_back(ck * ck);
  }
  return s;
}

// Sorts `v`, whose elements at stride `stride` form few monotone runs (keys b_j^2 / c_k^2 are
// smooth along each position inside a block). Falls back to std::sort when the runs are short.
template <class T, class Key>
void sort_strided_runs(std::vector<T>& v, std::size_t stride, Key key) {
  const auto less = [&](const T& a, const T& b) { return key(a) < key(b); };
  if (stride == 0 || v.size() < 64) {
    std::sort(v.begin(), v.end(), less);
    return;
  }
  std::vector<T> buf;
  buf.reserve(v.size());
  std::vector<std::size_t> bounds{0};
  for (std::size_t r = 0; r < stride && r < v.size(); ++r) {
    std::size_t start = buf.size();
    for (std::size_t i = r; i < v.size(); i += stride) {
      if (buf.size() > start + 1) {
        const bool up = key(buf[start]) <= key(buf[start + 1]);
        const double last = key(buf.back()), cur = key(v[i]);
        if (up ? cur < last : cur >= last) {
          if (!up) std::reverse(buf.begin() + static_cast<std::ptrdiff_t>(start), buf.end());
          start = buf.size();
          bounds.push_back(start);
        }
      }
      buf.push_back(v[i]);
    }
    if (buf.size() > start + 1 && key(buf[start]) > key(buf[start + 1]))
      std::reverse(buf.begin() + static_cast<std::ptrdiff_t>(start), buf.end());
    if (bounds.back() != buf.size()) bounds.push_back(buf.size());
  }
  if (bounds.size() - 1 > v.size() / 32) {
    std::sort(v.begin(), v.end(), less);
    return;
  }
  // Bottom-up pairwise merging of the runs.
  std::vector<T> out(v.size());
  while (bounds.size() > 2) {
    std::vector<std::size_t> next{0};
    for (std::size_t k = 0; k + 1 < bounds.size(); k += 2) {
      const std::size_t a = bounds[k], b = bounds[k + 1], c = k + 2 < bounds.size() ? bounds[k + 2] : b;
      std::merge(buf.begin() + static_cast<std::ptrdiff_t>(a), buf.begin() + static_cast<std::ptrdiff_t>(b),
                 buf.begin() + static_cast<std::ptrdiff_t>(b), buf.begin() + static_cast<std::ptrdiff_t>(c),
                 out.begin() + static_cast<std::ptrdiff_t>(a), less);
      next.push_back(c);
    }
    buf.swap(out);
    bounds.swap(next);
  }
  v.swap(buf);
}

// sum_j |U beta_j - V gamma_j| for many (U, V) pairs against one fixed axis.
class AbsDiffSweep {
 public:
  AbsDiffSweep(const AxisSquares& last, std::size_t l) {
    struct Entry {
      double key, beta, gamma;
    };
    std::vector<Entry> entries;
    entries.reserve(last.beta.size());
    for (std::size_t i = 0; i < last.beta.size(); ++i) {
      const double b = last.beta[i], g = last.gamma[i];
      const double key = g > 0.0 ? b / g : (b > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      entries.push_back({key, b, g});
    }
    sort_strided_runs(entries, l, [](const Entry& e) { return e.key; });
    keys_.reserve(entries.size());
    sum_beta_.assign(entries.size() + 1, 0.0L);
    sum_gamma_.assign(entries.size() + 1, 0.0L);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      keys_.push_back(entries[i].key);
      sum_beta_[i + 1] = sum_beta_[i] + entries[i].beta;
      sum_gamma_[i + 1] = sum_gamma_[i] + entries[i].gamma;
    }
  }

  long double operator()(double u, double v) const {
    std::size_t hint = 0;
    return eval(u, v, hint);
  }

  /// Same as operator(), for queries with non-decreasing v/u: the search gallops forward from `hint`.
  long double eval(double u, double v, std::size_t& hint) const {
    const long double tb = sum_beta_.back(), tg = sum_gamma_.back();
    if (u == 0.0) return v * tg;
    if (v == 0.0) return u * tb;
    const double theta = v / u;
    std::size_t lo = hint, step = 1, hi = hint;
    while (hi < keys_.size() && keys_[hi] < theta) {
      lo = hi + 1;
      hi += step;
      step *= 2;
    }
    hi = std::min(hi, keys_.size());
    const auto idx = static_cast<std::size_t>(std::lower_bound(keys_.begin() + static_cast<std::ptrdiff_t>(lo),
                                                               keys_.begin() + static_cast<std::ptrdiff_t>(hi), theta) -
                                              keys_.begin());
    hint = idx;
    const long double lo_b = sum_beta_[idx], lo_g = sum_gamma_[idx];
    return u * (tb - lo_b) - v * (tg - lo_g) + v * lo_g - u * lo_b;
  }

 private:
  std::vector<double> keys_;
  std::vector<long double> sum_beta_;
  std::vector<long double> sum_gamma_;
};

}  // namespace

RegularityStats regularity_stats(const WeightTable& table, Index l) {
  const std::size_t d = table.dim();
  const double bn_sq = table.norm_sq();
  if (!(bn_sq > 0.0)) throw NumericError("regularity_stats: b_n = 0");
  std::vector<AxisBlocks> blocks;
  double cn_sq = 1.0;
  for (std::size_t q = 0; q < d; ++q) {
    blocks.push_back(axis_block_averages(table.axis(q), l));
    cn_sq *= blocks.back().norm_sq;
  }
  if (!(cn_sq > 0.0)) throw NumericError("regularity_stats: degenerate weights, c_n = 0 so cs3 is undefined");

  RegularityStats st;
  std::vector<AxisSquares> squares(d);
  double log_keep = 0.0;
  double mass = 1.0;
  double cs3 = 1.0;
  for (std::size_t q = 0; q < d; ++q) {
    const AxisWeights& w = table.axis(q);
    const AxisBlocks& c = blocks[q];
    squares[q] = axis_squares(w, c);
    long double dev = 0.0L;
    const Index j_lo = c.k_lo * l + 1;
    for (std::size_t i = 0; i < squares[q].beta.size(); ++i) {
      const Index j = j_lo + static_cast<Index>(i);
      const long double diff = static_cast<long double>(w.at(j)) - c.at(floor_div(j - 1, l));
      dev += diff * diff;
    }
    const double cs1_q = static_cast<double>(dev / w.norm_sq);
    log_keep += std::log1p(-cs1_q);
    mass *= static_cast<double>(l) * c.norm_sq / w.norm_sq;
    double cmax = 0.0;
    for (double v : c.values) cmax = std::max(cmax, std::abs(v));
    cs3 *= cmax / std::sqrt(c.norm_sq);
  }
  // sum_k sum_{j in I_k} (prod b - prod c)^2 = prod B_q - prod (l C_q) since sum_{j in I_k} b_j = l c_k per axis.
  st.cs1 = -std::expm1(log_keep);
  st.block_mass_ratio = mass;
  st.cs3 = cs3;

  if (d == 1) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < squares[0].beta.size(); ++i) s += std::abs(squares[0].beta[i] - squares[0].gamma[i]);
    st.cs2 = static_cast<double>(s / bn_sq);
    return st;
  }

  const AbsDiffSweep sweep(squares[d - 1], static_cast<std::size_t>(l));
  std::size_t combos = 1;
  for (std::size_t q = 0; q + 1 < d; ++q) combos *= squares[q].beta.size();
  if (combos > std::size_t{1} << 30)
    throw NumericError("regularity_stats: support too large for exact cs2 enumeration");

  // Fixed chunking keeps the reduction order independent of the thread count.
  constexpr std::int64_t kChunks = 256;
  std::vector<long double> partial(kChunks, 0.0L);
  const auto total = static_cast<std::int64_t>(combos);
#pragma omp parallel for schedule(static)
  for (std::int64_t chunk = 0; chunk < kChunks; ++chunk) {
    const std::int64_t begin = total * chunk / kChunks;
    const std::int64_t end = total * (chunk + 1) / kChunks;
    struct Query {
      double theta, u, v;
    };
    std::vector<Query> queries;
    queries.reserve(static_cast<std::size_t>(end - begin));
    for (std::int64_t flat = begin; flat < end; ++flat) {
      auto rem = static_cast<std::size_t>(flat);
      double u = 1.0, v = 1.0;
      for (std::size_t q = d - 1; q > 0; --q) {
        const std::size_t ext = squares[q - 1].beta.size();
        const std::size_t i = rem % ext;
        rem /= ext;
        u *= squares[q - 1].beta[i];
        v *= squares[q - 1].gamma[i];
      }
      if (u == 0.0 && v == 0.0) continue;
      queries.push_back({u > 0.0 ? v / u : std::numeric_limits<double>::infinity(), u, v});
    }
    sort_strided_runs(queries, static_cast<std::size_t>(l), [](const Query& q) { return q.theta; });
    long double acc = 0.0L;
    std::size_t hint = 0;
    for (const auto& qr : queries) acc += qr.u == 0.0 ? sweep(qr.u, qr.v) : sweep.eval(qr.u, qr.v, hint);
    partial[static_cast<std::size_t>(chunk)] = acc;
  }
  long double s = 0.0L;
  for (long double p : partial) s += p;
  st.cs2 = static_cast<double>(s / bn_sq);
  return st;
}

double scaling_ratio(const AxisKernel& kernel, Index n, double s) {
  if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("scaling_ratio: s must lie in (0, 1]");
  const Index m = scaled_index(n, s);
  if (m < 1) throw std::invalid_argument("scaling_ratio: floor(s n) must be >= 1");
  const double num = axis_weight_table(kernel, m).norm_sq;
  const double den = axis_weight_table(kernel, n).norm_sq;
  return num / den;
}

}  // namespace fbslab::kernels
