#include "fbslab/innovations.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include "json.hpp"
#include <numbers>

#include "fbslab/errors.hpp"

namespace fbslab::innovations {

namespace {

constexpr std::int64_t kCenteringSamples = 10'000'000;
constexpr std::size_t kMaxEnumeratedTaps = 20;
constexpr int kBootstrapResamples = 200;

std::vector<std::pair<MultiIndex, double>> nonzero_taps(const Field& filter) {
  std::vector<std::pair<MultiIndex, double>> taps;
  for_each_index(filter.box(), [&](std::span<const Index> m) {
    const double w = filter(m);
    if (w != 0.0) taps.emplace_back(MultiIndex(m.begin(), m.end()), w);
  });
  return taps;
}

double gaussian_expectation(Link link, double scale) {
  if (scale == 0.0) return apply_link(link, 0.0);
  auto f = [&](double z) { return apply_link(link, scale * z) * std::exp(-0.5 * z * z); };
  const double inf = std::numeric_limits<double>::infinity();
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-14) /
         std::sqrt(2.0 * std::numbers::pi);
}

double compute_centering(const Field& filter, Link link, NoiseLaw noise, std::uint64_t seed) {
  if (link == Link::Linear) return 0.0;
  const auto taps = nonzero_taps(filter);
  if (noise == NoiseLaw::StandardGaussian) {
    double sq = 0.0;
    for (const auto& t : taps) sq += t.second * t.second;
    return gaussian_expectation(link, std::sqrt(sq));
  }
  if (noise == NoiseLaw::Rademacher && taps.size() <= kMaxEnumeratedTaps) {
    const std::uint64_t count = std::uint64_t{1} << taps.size();
    long double acc = 0.0L;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
      double v = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) v += ((mask >> k) & 1U) ? taps[k].second : -taps[k].second;
      acc += apply_link(link, v);
    }
    return static_cast<double>(acc / static_cast<long double>(count));
  }
  Engine engine = make_engine(seed, streams::kCentering, 0);
  std::vector<double> eps(taps.size());
  long double acc = 0.0L;
  for (std::int64_t s = 0; s < kCenteringSamples; ++s) {
    fill_noise(noise, engine, eps);
    double v = 0.0;
    for (std::size_t k = 0; k < taps.size(); ++k) v += taps[k].second * eps[k];
    acc += apply_link(link, v);
  }
  return static_cast<double>(acc / static_cast<long double>(kCenteringSamples));
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string noise_name(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::StandardGaussian: return "gaussian";
    case NoiseLaw::Rademacher: return "rademacher";
    case NoiseLaw::CenteredExponential: return "centered_exponential";
  }
  return "unknown";
}

NoiseLaw noise_from_name(const std::string& name) {
  for (auto law : {NoiseLaw::StandardGaussian, NoiseLaw::Rademacher, NoiseLaw::CenteredExponential})
    if (noise_name(law) == name) return law;
  throw ConfigError("innovations.noise", "unknown noise law '" + name + "' (gaussian, rademacher, centered_exponential)");
}

void fill_noise(NoiseLaw law, Engine& engine, std::span<double> out) {
  switch (law) {
    case NoiseLaw::StandardGaussian: {
      boost::random::normal_distribution<double> dist;
      for (double& x : out) x = dist(engine);
      return;
    }
    case NoiseLaw::Rademacher: {
      std::uint64_t bits = 0;
      int left = 0;
      for (double& x : out) {
        if (left == 0) {
          bits = engine();
          left = 64;
        }
        x = (bits & 1U) ? 1.0 : -1.0;
        bits >>= 1;
        --left;
      }
      return;
    }
    case NoiseLaw::CenteredExponential: {
      boost::random::exponential_distribution<double> dist;
      for (double& x : out) x = dist(engine) - 1.0;
      return;
    }
  }
}

double noise_difference_norm(NoiseLaw law, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("noise_difference_norm: p must be >= 1");
  switch (law) {
    case NoiseLaw::StandardGaussian: {
      // eps - eps* ~ N(0, 2); E|Z|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi).
      const double abs_moment = std::exp(0.5 * p * std::log(2.0) + std::lgamma(0.5 * (p + 1.0))) / std::sqrt(std::numbers::pi);
      return std::sqrt(2.0) * std::pow(abs_moment, 1.0 / p);
    }
    case NoiseLaw::Rademacher: return 2.0 * std::pow(2.0, -1.0 / p);
    case NoiseLaw::CenteredExponential: return std::exp(std::lgamma(p + 1.0) / p);  // Laplace(1) difference
  }
  return 0.0;
}

std::string link_name(Link link) {
  switch (link) {
    case Link::Linear: return "linear";
    case Link::Abs: return "abs";
    case Link::Tanh: return "tanh";
  }
  return "unknown";
}

Link link_from_name(const std::string& name) {
  for (auto l : {Link::Linear, Link::Abs, Link::Tanh})
    if (link_name(l) == name) return l;
  throw ConfigError("innovations.link", "unknown link '" + name + "' (linear, abs, tanh)");
}

double apply_link(Link link, double v) {
  switch (link) {
    case Link::Linear: return v;
    case Link::Abs: return std::abs(v);
    case Link::Tanh: return std::tanh(v);
  }
  return v;
}

InnovationModel::InnovationModel(Field filter, Link link, NoiseLaw noise)
    : filter_(std::move(filter)), link_(link), noise_(noise) {
  if (filter_.dim() == 0 || filter_.size() == 0) throw ConfigError("innovations.filter", "filter must be non-empty");
  for (double w : filter_.values())
    if (!std::isfinite(w)) throw ConfigError("innovations.filter", "filter weights must be finite");
  centering_ = compute_centering(filter_, link_, noise_, hash());
}

InnovationModel InnovationModel::from_taps(std::size_t dim, const std::vector<FilterTap>& taps, Link link,
                                           NoiseLaw noise) {
  if (taps.empty()) throw ConfigError("innovations.filter", "need at least one tap");
  MultiIndex lo(dim, 0), hi(dim, 0);
  for (const auto& t : taps) {
    if (t.offset.size() != dim)
      throw ConfigError("innovations.filter", "tap offset has dimension " + std::to_string(t.offset.size()) +
                                                  ", expected " + std::to_string(dim));
    for (std::size_t q = 0; q < dim; ++q) {
      lo[q] = std::min(lo[q], t.offset[q]);
      hi[q] = std::max(hi[q], t.offset[q]);
    }
  }
  Field f(Box(lo, hi));
  for (const auto& t : taps) f(t.offset) += t.weight;
  return InnovationModel(std::move(f), link, noise);
}

InnovationModel InnovationModel::iid(std::size_t dim, NoiseLaw noise) {
  return from_taps(dim, {{MultiIndex(dim, 0), 1.0}}, Link::Linear, noise);
}

Index InnovationModel::filter_radius() const {
  Index r = 0;
  for (const auto& t : nonzero_taps(filter_))
    for (Index c : t.first) r = std::max(r, std::abs(c));
  return r;
}

double InnovationModel::filter_sum() const {
  long double s = 0.0L;
  for (double w : filter_.values()) s += w;
  return static_cast<double>(s);
}

double InnovationModel::filter_abs_sum() const {
  long double s = 0.0L;
  for (double w : filter_.values()) s += std::abs(w);
  return static_cast<double>(s);
}

double InnovationModel::filter_sq_sum() const {
  long double s = 0.0L;
  for (double w : filter_.values()) s += static_cast<long double>(w) * w;
  return static_cast<double>(s);
}

Box InnovationModel::noise_box(const Box& region) const { return region.minkowski_sum(filter_.box().reflected()); }

std::string InnovationModel::describe() const {
  std::string s = "link=" + link_name(link_) + ";noise=" + noise_name(noise_) + ";filter=" + filter_.box().to_string() + "[";
  bool first = true;
  for (double w : filter_.values()) {
    s += (first ? "" : ",") + fmt17(w);
    first = false;
  }
  return s + "]";
}

std::uint64_t InnovationModel::hash() const { return fnv1a(describe()); }

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Field draw_noise(NoiseLaw law, const Box& box, std::uint64_t seed) {
  Field noise(box);
  Engine engine = make_engine(seed, streams::kField, 0);
  fill_noise(law, engine, noise.values());
  return noise;
}

Field realize(const InnovationModel& model, const Field& noise, const Box& region, ConvolutionMethod method) {
  Field x = convolve(noise, model.filter(), region, method);
  if (model.is_linear()) return x;
  for (double& v : x.values()) v = model.realize(v);
  return x;
}

Field sample_field(const InnovationModel& model, const Box& region, std::uint64_t seed, ConvolutionMethod method) {
  const Field noise = draw_noise(model.noise(), model.noise_box(region), seed);
  return realize(model, noise, region, method);
}

CoupledSample coupled_pair(const InnovationModel& model, const Box& region, std::uint64_t seed) {
  const Box nb = model.noise_box(region);
  const MultiIndex origin(model.dim(), 0);
  if (!nb.contains(origin))
    throw std::invalid_argument("coupled_pair: region does not reach the noise at site 0");
  CoupledSample s;
  s.noise = draw_noise(model.noise(), nb, seed);
  s.noise_star = s.noise;
  Engine engine = make_engine(seed, streams::kCoupling, 0);
  double fresh = 0.0;
  fill_noise(model.noise(), engine, std::span<double>(&fresh, 1));
  s.noise_star(origin) = fresh;
  s.x = realize(model, s.noise, region);
  s.x_star = realize(model, s.noise_star, region);
  return s;
}

DependenceSummary dependence_measure(const InnovationModel& model, double p, std::int64_t trials,
                                     std::uint64_t seed) {
  if (!(p >= 2.0)) throw ConfigError("p", "dependence measure requires p >= 2");
  DependenceSummary out;
  out.p = p;
  if (model.is_linear()) {
    out.delta_p = model.filter_abs_sum() * noise_difference_norm(model.noise(), p);
    out.is_exact = true;
    const LongRunVariance lrv = long_run_variance(model);
    out.sigma_sq = lrv.value;
    return out;
  }
  if (trials < 2) throw ConfigError("trials", "Monte Carlo dependence measure needs at least 2 trials");

  // Only sites i in supp(psi) see the noise at 0, so X_i - X*_i vanishes elsewhere.
  const auto taps = nonzero_taps(model.filter());
  const std::size_t s = taps.size();
  const Box nb = model.filter().box().minkowski_sum(model.filter().box().reflected());
  Field noise(nb);
  const MultiIndex origin(model.dim(), 0);
  const std::size_t origin_off = noise.offset(origin);
  std::vector<std::vector<std::size_t>> feed(s, std::vector<std::size_t>(s));
  MultiIndex tmp(model.dim());
  for (std::size_t a = 0; a < s; ++a)
    for (std::size_t b = 0; b < s; ++b) {
      for (std::size_t q = 0; q < model.dim(); ++q) tmp[q] = taps[a].first[q] - taps[b].first[q];
      feed[a][b] = noise.offset(tmp);
    }

  Engine engine = make_engine(seed, streams::kDependence, 0);
  std::vector<double> powers(static_cast<std::size_t>(trials) * s);
  double fresh = 0.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    fill_noise(model.noise(), engine, noise.values());
    fill_noise(model.noise(), engine, std::span<double>(&fresh, 1));
    const double shift = fresh - noise.values()[origin_off];
    for (std::size_t a = 0; a < s; ++a) {
      double v = 0.0;
      for (std::size_t b = 0; b < s; ++b) v += taps[b].second * noise.values()[feed[a][b]];
      const double diff = apply_link(model.link(), v) - apply_link(model.link(), v + taps[a].second * shift);
      powers[static_cast<std::size_t>(t) * s + a] = std::pow(std::abs(diff), p);
    }
  }

  auto estimate = [&](auto&& trial_of) {
    std::vector<long double> sums(s, 0.0L);
    for (std::int64_t t = 0; t < trials; ++t) {
      const std::size_t row = static_cast<std::size_t>(trial_of(t)) * s;
      for (std::size_t a = 0; a < s; ++a) sums[a] += powers[row + a];
    }
    double delta = 0.0;
    for (std::size_t a = 0; a < s; ++a)
      delta += std::pow(static_cast<double>(sums[a] / static_cast<long double>(trials)), 1.0 / p);
    return delta;
  };
  out.delta_p = estimate([](std::int64_t t) { return t; });

  Engine boot = make_engine(seed, streams::kBootstrap, 0);
  std::uniform_int_distribution<std::int64_t> pick(0, trials - 1);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(trials));
  double m1 = 0.0, m2 = 0.0;
  for (int r = 0; r < kBootstrapResamples; ++r) {
    for (auto& i : idx) i = pick(boot);
    const double v = estimate([&](std::int64_t t) { return idx[static_cast<std::size_t>(t)]; });
    m1 += v;
    m2 += v * v;
  }
  m1 /= kBootstrapResamples;
  out.std_error = std::sqrt(std::max(0.0, m2 / kBootstrapResamples - m1 * m1));
  if (out.delta_p > 0.0 && out.std_error / out.delta_p > 0.05)
    out.warning = "trials too small: relative standard error " + std::to_string(out.std_error / out.delta_p);
  out.sigma_sq = long_run_variance(model, seed).value;
  return out;
}

LongRunVariance long_run_variance(const InnovationModel& model, std::uint64_t seed, std::int64_t batches,
                                  Index batch_side) {
  LongRunVariance out;
  if (model.is_linear()) {
    const double s = model.filter_sum();
    out.value = s * s;
    out.exact = true;
    out.degenerate = std::abs(s) <= 1e-12 * std::max(1.0, model.filter_abs_sum());
    return out;
  }
  if (batches < 2) throw ConfigError("batches", "long-run variance needs at least 2 batches");
  const std::size_t d = model.dim();
  const Box lags = model.filter().box().minkowski_sum(model.filter().box().reflected());
  Index reach = 0;
  for (std::size_t q = 0; q < d; ++q) reach = std::max(reach, lags.extent(q));
  if (batch_side <= 0) batch_side = std::max<Index>(32, 8 * reach);
  const Box region = Box::cube(d, 0, batch_side - 1);

  std::vector<double> per_batch(static_cast<std::size_t>(batches));
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t b = 0; b < batches; ++b) {
    const Field x = sample_field(model, region, derive_seed(seed, streams::kLongRun, static_cast<std::uint64_t>(b)));
    long double total = 0.0L;
    MultiIndex shifted(d);
    for_each_index(lags, [&](std::span<const Index> k) {
      MultiIndex lo(d), hi(d);
      for (std::size_t q = 0; q < d; ++q) {
        lo[q] = std::max<Index>(0, -k[q]);
        hi[q] = std::min<Index>(batch_side - 1, batch_side - 1 - k[q]);
      }
      const Box valid(lo, hi);
      if (valid.empty()) return;
      long double acc = 0.0L;
      for_each_index(valid, [&](std::span<const Index> i) {
        for (std::size_t q = 0; q < d; ++q) shifted[q] = i[q] + k[q];
        acc += x(i) * x(shifted);
      });
      total += acc / static_cast<long double>(valid.volume());
    });
    per_batch[static_cast<std::size_t>(b)] = static_cast<double>(total);
  }
  double m1 = 0.0, m2 = 0.0;
  for (double v : per_batch) {
    m1 += v;
    m2 += v * v;
  }
  const auto nb = static_cast<double>(batches);
  m1 /= nb;
  out.value = m1;
  out.std_error = std::sqrt(std::max(0.0, (m2 / nb - m1 * m1) / (nb - 1.0)));
  out.degenerate = std::abs(out.value) <= 3.0 * out.std_error;
  return out;
}

InnovationModel m_truncate(const InnovationModel& model, Index m) {
  if (m < 0) throw ConfigError("m", "m must be >= 0");
  if (!model.is_linear())
    throw UnsupportedOperation(
        "m_truncate: the conditional expectation has no closed form for a nonlinear link; only the linear link is supported");
  const std::size_t d = model.dim();
  const Box window = Box::cube(d, -(m / 2), m / 2);
  const Box kept = model.filter().box().intersect(window);
  if (kept.empty()) return InnovationModel(Field(Box::cube(d, 0, 0), 0.0), model.link(), model.noise());
  Field f(kept);
  for_each_index(kept, [&](std::span<const Index> j) { f(j) = model.filter()(j); });
  return InnovationModel(std::move(f), model.link(), model.noise());
}

double approximation_error(const InnovationModel& model, Index m) {
  const InnovationModel bar = m_truncate(model, m);
  long double s = 0.0L;
  for_each_index(model.filter().box(), [&](std::span<const Index> j) {
    const double diff = model.filter()(j) - bar.filter().at_or_zero(j);
    s += static_cast<long double>(diff) * diff;
  });
  return std::sqrt(static_cast<double>(s));
}

Field filter_autocorrelation(const Field& filter) {
  const Box lags = filter.box().minkowski_sum(filter.box().reflected());
  Field r(lags);
  const std::size_t d = filter.dim();
  MultiIndex shifted(d);
  for_each_index(lags, [&](std::span<const Index> k) {
    long double acc = 0.0L;
    for_each_index(filter.box(), [&](std::span<const Index> j) {
      for (std::size_t q = 0; q < d; ++q) shifted[q] = j[q] + k[q];
      acc += static_cast<long double>(filter(j)) * filter.at_or_zero(shifted);
    });
    r(k) = static_cast<double>(acc);
  });
  return r;
}

void write_field(const std::filesystem::path& stem, const Field& field, const FieldMetadata& meta) {
  auto bin = stem;
  bin += ".bin";
  auto side = stem;
  side += ".json";
  {
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + bin.string());
    for (double v : field.values()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  nlohmann::ordered_json j;
  j["dtype"] = "float64";
  j["endianness"] = "little";
  j["layout"] = "row-major, last axis fastest";
  j["model_hash"] = meta.model_hash;
  j["region"] = {{"hi", meta.region.hi}, {"lo", meta.region.lo}};
  j["seed"] = meta.seed;
  std::ofstream out(side);
  if (!out) throw std::runtime_error("cannot write " + side.string());
  out << j.dump(2) << "\n";
}

Field read_field(const std::filesystem::path& stem, FieldMetadata* meta) {
  auto bin = stem;
  bin += ".bin";
  auto side = stem;
  side += ".json";
  std::ifstream in_side(side);
  if (!in_side) throw std::runtime_error("cannot read " + side.string());
  const auto j = nlohmann::json::parse(in_side);
  const Box region(j.at("region").at("lo").get<MultiIndex>(), j.at("region").at("hi").get<MultiIndex>());
  Field f(region);
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + bin.string());
  for (double& v : f.values()) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
  if (!in) throw std::runtime_error("truncated field file " + bin.string());
  if (meta) {
    meta->region = region;
    meta->seed = j.at("seed").get<std::uint64_t>();
    meta->model_hash = j.at("model_hash").get<std::uint64_t>();
  }
  return f;
}

}  // namespace fbslab::innovations
