#include "fbslab/verify.hpp"

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <random>

#include "fbslab/errors.hpp"
#include "fbslab/fbs_oracle.hpp"
#include "fbslab/reference.hpp"
#include "fbslab/rng.hpp"
#include "fbslab/stats.hpp"

namespace fbslab::verify {

using innovations::InnovationModel;
using kernels::AxisKernel;
using kernels::AxisWeights;
using kernels::ProductKernel;
using sums::PartialSumSampler;
using sums::Point;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string fmt_point(const Point& t) {
  std::string s = "(";
  for (std::size_t q = 0; q < t.size(); ++q) s += (q ? "," : "") + fmt(t[q]);
  return s + ")";
}

std::string route_name(sums::SamplerRoute r) {
  switch (r) {
    case sums::SamplerRoute::Field: return "field";
    case sums::SamplerRoute::Weights: return "weights";
    default: return "auto";
  }
}

Json kernel_stats(const ProductKernel& kernel) {
  Json axes = Json::array();
  for (const auto& ax : kernel.axes())
    axes.push_back({{"name", ax.name()},
                    {"declared_hurst", ax.declared_hurst()},
                    {"truncation_radius", ax.truncation_radius()},
                    {"tail_fraction", ax.tail_fraction()},
                    {"truncation_capped", ax.truncation_capped()}});
  return axes;
}

/// Rows of S_n(t)/b_n, one replica per row; replica r uses derive_seed(seed, kReplica, r).
std::vector<double> run_replicas(const PartialSumSampler& sampler, std::int64_t replicas, std::uint64_t seed) {
  const std::size_t p = sampler.t_grid().size();
  std::vector<double> rows(static_cast<std::size_t>(replicas) * p);
  const double bn = sampler.normalizer();
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t r = 0; r < replicas; ++r) {
    const auto v = sampler.sample(derive_seed(seed, streams::kReplica, static_cast<std::uint64_t>(r)));
    for (std::size_t a = 0; a < p; ++a) rows[static_cast<std::size_t>(r) * p + a] = v[a] / bn;
  }
  return rows;
}

double require_sigma_sq(const InnovationModel& model, std::uint64_t seed) {
  const auto lrv = innovations::long_run_variance(model, seed);
  if (lrv.degenerate)
    throw DegenerateModelError("long-run variance is zero (filter weights sum to 0); S_n/b_n has no Gaussian limit");
  return lrv.value;
}

class AxisTableCache {
 public:
  explicit AxisTableCache(const ProductKernel& kernel) : kernel_(kernel) {}
  const AxisWeights& get(std::size_t q, Index m) {
    const auto key = std::make_pair(q, m);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, kernels::axis_weight_table(kernel_.axis(q), m)).first;
    return it->second;
  }

 private:
  const ProductKernel& kernel_;
  std::map<std::pair<std::size_t, Index>, AxisWeights> cache_;
};

WeightCovarianceIdentity identity_with(AxisTableCache& cache, std::size_t d, std::span<const Index> m,
                                       std::span<const Index> mp) {
  long double lhs = 1.0L, rhs = 1.0L;
  for (std::size_t q = 0; q < d; ++q) {
    const auto& a = cache.get(q, m[q]);
    const auto& b = cache.get(q, mp[q]);
    const auto& c = cache.get(q, std::abs(m[q] - mp[q]));
    lhs *= kernels::weight_inner_product(a, b);
    rhs *= 0.5L * (static_cast<long double>(a.norm_sq) + b.norm_sq - c.norm_sq);
  }
  WeightCovarianceIdentity w;
  w.lhs = static_cast<double>(lhs);
  w.rhs = static_cast<double>(rhs);
  const double scale = std::max(std::abs(w.lhs), std::abs(w.rhs));
  w.rel_error = scale > 0.0 ? std::abs(w.lhs - w.rhs) / scale : 0.0;
  return w;
}

Json matrix_json(const std::vector<double>& v, std::size_t p) {
  Json rows = Json::array();
  for (std::size_t a = 0; a < p; ++a) rows.push_back(std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(a * p), v.begin() + static_cast<std::ptrdiff_t>((a + 1) * p)));
  return rows;
}

}  // namespace

Criterion make_criterion(std::string name, double value, std::string relation, double threshold) {
  Criterion c;
  c.name = std::move(name);
  c.value = value;
  c.threshold = threshold;
  c.relation = std::move(relation);
  if (c.relation == "<=") c.pass = value <= threshold;
  else if (c.relation == "<") c.pass = value < threshold;
  else if (c.relation == ">=") c.pass = value >= threshold;
  else if (c.relation == ">") c.pass = value > threshold;
  else if (c.relation == "==") c.pass = value == threshold;
  else throw std::invalid_argument("unknown relation " + c.relation);
  return c;
}

bool Report::pass() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.pass; });
}

Json Report::to_json(bool with_timestamp) const {
  Json crit = Json::object();
  for (const auto& c : criteria)
    crit[c.name] = {{"value", c.value}, {"threshold", c.threshold}, {"relation", c.relation}, {"pass", c.pass}};
  Json prov = {{"config_hash", hex64(innovations::fnv1a(config.dump()))}, {"version", kVersion}};
  if (with_timestamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    prov["timestamp"] = buf;
  }
  return {{"check", check},
          {"format_version", kFormatVersion},
          {"config", config},
          {"statistics", statistics},
          {"seeds", seeds},
          {"verdict", {{"pass", pass()}, {"criteria", crit}}},
          {"provenance", prov}};
}

// ---------------------------------------------------------------------------------------------

Report clt_check(const ProductKernel& kernel, const InnovationModel& model, const CltParams& params,
                 const RunContext& ctx) {
  if (params.n.size() != kernel.dim()) throw ConfigError("n", "need one entry per axis");
  if (params.replicas < 10) throw ConfigError("replicas", "need at least 10 replicas");
  Report rep;
  rep.check = "clt";
  const double sigma_sq = require_sigma_sq(model, ctx.seed);
  sums::SamplerOptions opt;
  opt.near_margin = params.near_margin;
  opt.budget_bytes = ctx.budget_bytes;
  const PartialSumSampler sampler(kernel, model, params.n, {Point(kernel.dim(), 1.0)}, opt);
  const auto v = run_replicas(sampler, params.replicas, ctx.seed);

  const double sd = std::sqrt(sigma_sq);
  const double ks = stats::ks_statistic(v, [&](double x) { return stats::normal_cdf(x / sd); });
  const double pval = stats::ks_pvalue(ks, v.size());
  const auto mom = stats::gaussian_moments(v, sigma_sq);
  double max_z = 0.0;
  for (double z : mom.z) max_z = std::max(max_z, std::abs(z));
  const double var = stats::variance(v);

  rep.statistics = {{"n", params.n},
                    {"replicas", params.replicas},
                    {"sigma_sq", sigma_sq},
                    {"b_n", sampler.normalizer()},
                    {"kernel", kernel_stats(kernel)},
                    {"model", model.describe()},
                    {"route", route_name(sampler.route())},
                    {"far_field_fraction", sampler.far_field_fraction()},
                    {"ks_distance", ks},
                    {"ks_pvalue", pval},
                    {"sample_mean", stats::mean(v)},
                    {"sample_variance", var},
                    {"variance_ratio", var / sigma_sq},
                    {"moments",
                     {{"empirical", mom.empirical}, {"target", mom.target}, {"std_error", mom.std_error}, {"z", mom.z}}}};
  if (!sampler.exact_covariance().empty())
    rep.statistics["exact_variance_ratio"] = sampler.exact_covariance()[0] / (sampler.normalizer() * sampler.normalizer() * sigma_sq);
  rep.seeds = {{"root", ctx.seed}, {"replica_stream", streams::kReplica}};
  rep.criteria.push_back(make_criterion("ks_pvalue", pval, ">", params.ks_pvalue_min));
  rep.criteria.push_back(make_criterion("moments_max_abs_z", max_z, "<=", params.moment_z_max));
  if (params.variance_rel_tol)
    rep.criteria.push_back(make_criterion("variance_rel_error", std::abs(var / sigma_sq - 1.0), "<=", *params.variance_rel_tol));
  for (std::size_t k = 0; k < 4; ++k) rep.plots["clt_moment_z"].emplace_back(static_cast<double>(k + 1), mom.z[k]);
  return rep;
}

WeightCovarianceIdentity weight_covariance_identity(const ProductKernel& kernel, std::span<const Index> m,
                                                    std::span<const Index> m_prime) {
  AxisTableCache cache(kernel);
  return identity_with(cache, kernel.dim(), m, m_prime);
}

Report fdd_check(const ProductKernel& kernel, const InnovationModel& model, const FddParams& params,
                 const RunContext& ctx) {
  const std::size_t d = kernel.dim();
  if (params.n.size() != d) throw ConfigError("n", "need one entry per axis");
  if (!kernel.fbs_eligible()) throw ConfigError("kernel", "fdd needs H in (0,1)^d; " + kernel.name() + " is not fBs-eligible");
  if (params.t_grid.empty()) throw ConfigError("t_grid", "grid must be non-empty");
  for (const auto& t : params.t_grid) {
    if (t.size() != d) throw ConfigError("t_grid", "grid point " + fmt_point(t) + " has wrong dimension");
    for (double c : t)
      if (!(c > 0.0 && c <= 1.0)) throw ConfigError("t_grid", "grid points must lie in (0,1]^d, got " + fmt_point(t));
  }
  const std::size_t p = params.t_grid.size();
  Report rep;
  rep.check = "fdd";
  std::vector<std::vector<Index>> corners;
  for (const auto& t : params.t_grid) corners.push_back(sums::scaled_corner(params.n, t));

  // Deterministic part.
  std::vector<std::pair<std::size_t, std::size_t>> pairs = params.identity_pairs;
  if (pairs.empty())
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a; b < p; ++b) pairs.emplace_back(a, b);
  AxisTableCache cache(kernel);
  Json id_rows = Json::array();
  double worst_identity = 0.0;
  for (const auto& [a, b] : pairs) {
    if (a >= p || b >= p) throw ConfigError("identity_pairs", "pair index out of range");
    const auto w = identity_with(cache, d, corners[a], corners[b]);
    worst_identity = std::max(worst_identity, w.rel_error);
    id_rows.push_back({{"t", fmt_point(params.t_grid[a])}, {"s", fmt_point(params.t_grid[b])}, {"lhs", w.lhs}, {"rhs", w.rhs}, {"rel_error", w.rel_error}});
  }
  rep.statistics["weight_identity"] = id_rows;
  rep.statistics["weight_identity_max_rel_error"] = worst_identity;
  rep.statistics["n"] = params.n;
  rep.statistics["kernel"] = kernel_stats(kernel);
  rep.criteria.push_back(make_criterion("weight_identity_max_rel_error", worst_identity, "<=", params.identity_tol));
  rep.seeds = {{"root", ctx.seed}, {"replica_stream", streams::kReplica}};
  if (!params.stochastic) return rep;

  const double sigma_sq = require_sigma_sq(model, ctx.seed);
  sums::SamplerOptions opt;
  opt.near_margin = params.near_margin;
  opt.budget_bytes = ctx.budget_bytes;
  const PartialSumSampler sampler(kernel, model, params.n, params.t_grid, opt);
  const auto rows = run_replicas(sampler, params.replicas, ctx.seed);
  const auto emp = stats::second_moments(rows, p);
  const auto hurst = kernel.hurst();
  std::vector<double> target(p * p), tol(p * p), exact_ratio;
  double worst = 0.0, worst_gap = 0.0;
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b)
      target[a * p + b] = sigma_sq * fbs::fbs_covariance(hurst, params.t_grid[a], params.t_grid[b]);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) {
      const std::size_t k = a * p + b;
      const double scale = std::sqrt(target[a * p + a] * target[b * p + b]);
      tol[k] = std::max(params.rel_tol * scale, params.mc_sigma * emp.std_error[k]);
      worst = std::max(worst, std::abs(emp.value[k] - target[k]) / tol[k]);
      rep.plots["fdd_covariance"].emplace_back(target[k], emp.value[k]);
    }
  if (!sampler.exact_covariance().empty()) {
    const double bn2 = sampler.normalizer() * sampler.normalizer();
    for (std::size_t k = 0; k < p * p; ++k) {
      exact_ratio.push_back(sampler.exact_covariance()[k] / bn2);
      const std::size_t a = k / p, b = k % p;
      const double scale = std::sqrt(target[a * p + a] * target[b * p + b]);
      worst_gap = std::max(worst_gap, std::abs(exact_ratio.back() - target[k]) / scale);
    }
    rep.statistics["finite_n_covariance"] = matrix_json(exact_ratio, p);
    rep.statistics["finite_n_max_gap_over_scale"] = worst_gap;
  }
  std::vector<std::string> labels;
  for (const auto& t : params.t_grid) labels.push_back(fmt_point(t));
  rep.statistics["t_grid"] = labels;
  rep.statistics["replicas"] = params.replicas;
  rep.statistics["sigma_sq"] = sigma_sq;
  rep.statistics["hurst"] = hurst;
  rep.statistics["b_n"] = sampler.normalizer();
  rep.statistics["route"] = route_name(sampler.route());
  rep.statistics["far_field_fraction"] = sampler.far_field_fraction();
  rep.statistics["model"] = model.describe();
  rep.statistics["empirical_covariance"] = matrix_json(emp.value, p);
  rep.statistics["empirical_std_error"] = matrix_json(emp.std_error, p);
  rep.statistics["target_covariance"] = matrix_json(target, p);
  rep.statistics["tolerance"] = matrix_json(tol, p);
  rep.statistics["covariance_worst_ratio"] = worst;
  rep.criteria.push_back(make_criterion("covariance_worst_error_over_tolerance", worst, "<=", 1.0));
  return rep;
}

// ---------------------------------------------------------------------------------------------

std::vector<WeightFamily> weight_corpus(std::size_t dim, std::int64_t count, Index max_side, std::uint64_t seed) {
  if (max_side < 2) throw ConfigError("max_side", "must be >= 2");
  Engine engine = make_engine(seed, streams::kWeightCorpus, 0);
  std::uniform_int_distribution<Index> side(1, max_side), shift(-3, 3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  boost::random::normal_distribution<double> normal;
  auto random_box = [&] {
    MultiIndex lo(dim), hi(dim);
    for (std::size_t q = 0; q < dim; ++q) {
      lo[q] = shift(engine);
      hi[q] = lo[q] + side(engine) - 1;
    }
    return Box(lo, hi);
  };
  static const char* kinds[] = {"gaussian", "sparse_sign", "constant_block", "b_table", "geometric"};
  std::vector<WeightFamily> out;
  for (std::int64_t i = 0; i < count; ++i) {
    WeightFamily f;
    f.kind = kinds[i % 5];
    switch (i % 5) {
      case 0: {
        f.weights = Field(random_box());
        for (double& v : f.weights.values()) v = normal(engine);
        break;
      }
      case 1: {
        f.weights = Field(random_box());
        for (double& v : f.weights.values()) v = unif(engine) < 0.2 ? (unif(engine) < 0.5 ? -1.0 : 1.0) : 0.0;
        f.weights.values()[0] = 1.0;
        break;
      }
      case 2: f.weights = Field(random_box(), 1.0); break;
      case 3: {
        std::vector<AxisKernel> axes;
        std::vector<Index> n(dim);
        for (std::size_t q = 0; q < dim; ++q) {
          axes.push_back(AxisKernel::fractional_gamma(0.05 + 0.4 * unif(engine), {1e-6, 4}));
          n[q] = std::uniform_int_distribution<Index>(1, std::max<Index>(1, max_side / 2))(engine);
        }
        const kernels::WeightTable table(ProductKernel(axes), n);
        f.weights = Field(table.support());
        for_each_index(f.weights.box(), [&](std::span<const Index> j) { f.weights(j) = table.weight(j); });
        break;
      }
      default: {
        const double rho = 0.3 + 0.6 * unif(engine);
        const Index r = std::max<Index>(1, max_side / 4);
        f.weights = Field(Box::cube(dim, -r, r));
        for_each_index(f.weights.box(), [&](std::span<const Index> j) {
          Index l1 = 0;
          for (Index c : j) l1 += std::abs(c);
          f.weights(j) = std::pow(rho, static_cast<double>(l1));
        });
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

Report moment_inequality_check(const std::vector<InnovationModel>& models, const MomentParams& params,
                               const RunContext& ctx) {
  if (models.empty()) throw ConfigError("models", "need at least one innovation model");
  for (double p : params.p)
    if (!(p >= 2.0)) throw ConfigError("p", "moment inequality needs p >= 2, got " + fmt(p));
  if (params.replicas < 10) throw ConfigError("replicas", "need at least 10 replicas");
  Report rep;
  rep.check = "moment_inequality";
  rep.seeds = {{"root", ctx.seed}, {"moment_stream", streams::kMoment}, {"corpus_stream", streams::kWeightCorpus},
               {"dependence_stream", streams::kDependence}, {"bootstrap_stream", streams::kBootstrap}};
  Json per_model = Json::array();
  std::int64_t total_violations = 0;
  double worst_ratio = 0.0;
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const auto& model = models[mi];
    const auto corpus = weight_corpus(model.dim(), params.families, params.max_side, derive_seed(ctx.seed, streams::kWeightCorpus, mi));
    std::vector<innovations::DependenceSummary> deltas;
    for (double p : params.p)
      deltas.push_back(innovations::dependence_measure(model, p, params.dependence_trials, derive_seed(ctx.seed, streams::kDependence, mi)));

    const std::size_t np = params.p.size();
    struct FamilyResult {
      std::vector<double> lhs, lhs_se, bound, bound_se, slack;
      std::vector<bool> ok;
    };
    std::vector<FamilyResult> results(corpus.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t f = 0; f < static_cast<std::int64_t>(corpus.size()); ++f) {
      const auto& fam = corpus[static_cast<std::size_t>(f)];
      const std::uint64_t fam_seed = derive_seed(ctx.seed, streams::kMoment, mi * 1000003ULL + static_cast<std::uint64_t>(f));
      std::vector<double> s(static_cast<std::size_t>(params.replicas));
      for (std::int64_t r = 0; r < params.replicas; ++r) {
        const Field x = innovations::sample_field(model, fam.weights.box(), derive_seed(fam_seed, streams::kReplica, static_cast<std::uint64_t>(r)));
        long double acc = 0.0L;
        for (std::size_t k = 0; k < x.size(); ++k) acc += static_cast<long double>(fam.weights.values()[k]) * x.values()[k];
        s[static_cast<std::size_t>(r)] = static_cast<double>(acc);
      }
      long double sq = 0.0L;
      for (double w : fam.weights.values()) sq += static_cast<long double>(w) * w;
      FamilyResult res;
      for (std::size_t k = 0; k < np; ++k) {
        const double p = params.p[k];
        const auto est = stats::pnorm(s, p, 200, fam_seed + k);
        const double factor = std::sqrt(2.0 * p * static_cast<double>(sq));
        const double bound = factor * deltas[k].delta_p;
        const double bound_se = factor * deltas[k].std_error;
        const double slack = params.mc_sigma * std::sqrt(est.std_error * est.std_error + bound_se * bound_se);
        res.lhs.push_back(est.value);
        res.lhs_se.push_back(est.std_error);
        res.bound.push_back(bound);
        res.bound_se.push_back(bound_se);
        res.slack.push_back(slack);
        res.ok.push_back(est.value <= bound + slack);
      }
      results[static_cast<std::size_t>(f)] = std::move(res);
    }

    Json m = {{"model", model.describe()}, {"families", params.families}, {"replicas", params.replicas}};
    Json per_p = Json::array();
    for (std::size_t k = 0; k < np; ++k) {
      std::int64_t violations = 0;
      double max_ratio = 0.0;
      for (std::size_t f = 0; f < results.size(); ++f) {
        const auto& r = results[f];
        if (!r.ok[k]) ++violations;
        if (r.bound[k] > 0.0) {
          const double ratio = r.lhs[k] / r.bound[k];
          max_ratio = std::max(max_ratio, ratio);
          rep.plots["moment_ratio_model" + std::to_string(mi) + "_p" + fmt(params.p[k])].emplace_back(static_cast<double>(f), ratio);
        }
      }
      total_violations += violations;
      worst_ratio = std::max(worst_ratio, max_ratio);
      per_p.push_back({{"p", params.p[k]},
                       {"delta_p", deltas[k].delta_p},
                       {"delta_p_std_error", deltas[k].std_error},
                       {"delta_p_exact", deltas[k].is_exact},
                       {"delta_p_warning", deltas[k].warning},
                       {"violations", violations},
                       {"max_lhs_over_bound", max_ratio}});
      rep.criteria.push_back(make_criterion("violations_model" + std::to_string(mi) + "_p" + fmt(params.p[k]),
                                            static_cast<double>(violations), "<=", 0.0));
    }
    m["per_p"] = per_p;
    Json kinds = Json::object();
    for (const auto& f : corpus) kinds[f.kind] = kinds.value(f.kind, 0) + 1;
    m["family_kinds"] = kinds;
    per_model.push_back(m);
  }
  rep.statistics = {{"models", per_model}, {"total_violations", total_violations}, {"max_lhs_over_bound", worst_ratio}};
  return rep;
}

// ---------------------------------------------------------------------------------------------

double tightness_beta(const std::vector<double>& hurst, double p, const std::vector<double>& gamma) {
  double beta = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < hurst.size(); ++q) {
    const double g = gamma.size() == 1 ? gamma[0] : gamma[q];
    beta = std::min(beta, p * (hurst[q] - g));
  }
  return beta;
}

Report tightness_check(const ProductKernel& kernel, const InnovationModel& model, const TightnessParams& params,
                       const RunContext& ctx) {
  const std::size_t d = kernel.dim();
  const auto hurst = kernel.hurst();
  if (!kernel.fbs_eligible()) throw ConfigError("kernel", kernel.name() + " is not fBs-eligible");
  double max_inv_h = 0.0;
  for (double h : hurst) max_inv_h = std::max(max_inv_h, 1.0 / h);
  if (!(params.p >= 2.0) || !(params.p > max_inv_h))
    throw ConfigError("p", "tightness needs p >= 2 and p > max 1/H_q = " + fmt(max_inv_h) + ", got " + fmt(params.p));
  if (params.gamma.size() != 1 && params.gamma.size() != d) throw ConfigError("gamma", "give one gamma or one per axis");
  for (std::size_t q = 0; q < d; ++q) {
    const double g = params.gamma.size() == 1 ? params.gamma[0] : params.gamma[q];
    if (!(g > 0.0 && g < hurst[q])) throw ConfigError("gamma", "each gamma_q must lie in (0, H_q)");
  }
  const double beta = tightness_beta(hurst, params.p, params.gamma);
  if (!(beta > 1.0)) throw ConfigError("gamma", "beta = min_q p (H_q - gamma_q) = " + fmt(beta) + " must exceed 1");
  if (params.n_ladder.empty()) throw ConfigError("n_ladder", "ladder must be non-empty");
  if (params.t_grid.empty()) throw ConfigError("t_grid", "grid must be non-empty");
  for (const auto& t : params.t_grid) {
    if (t.size() != d) throw ConfigError("t_grid", "grid point has wrong dimension");
    for (double c : t)
      if (!(c > 0.0 && c <= 1.0)) throw ConfigError("t_grid", "grid points must lie in (0,1]^d");
  }

  Report rep;
  rep.check = "tightness";
  rep.seeds = {{"root", ctx.seed}, {"replica_stream", streams::kReplica}};
  Json rungs = Json::array();
  std::vector<double> sups;
  for (std::size_t k = 0; k < params.n_ladder.size(); ++k) {
    const Index nn = params.n_ladder[k];
    const std::vector<Index> n(d, nn);
    sums::SamplerOptions opt;
    opt.near_margin = params.near_margin;
    opt.budget_bytes = ctx.budget_bytes;
    const PartialSumSampler sampler(kernel, model, n, params.t_grid, opt);
    const auto rows = run_replicas(sampler, params.replicas, derive_seed(ctx.seed, streams::kSweep, k));
    const std::size_t p = params.t_grid.size();
    double sup = 0.0, sup_se = 0.0;
    std::vector<double> ratios;
    for (std::size_t a = 0; a < p; ++a) {
      std::vector<double> col(static_cast<std::size_t>(params.replicas));
      for (std::size_t r = 0; r < col.size(); ++r) col[r] = rows[r * p + a];
      const auto m = stats::abs_moment(col, params.p);
      double tb = 1.0;
      for (double c : params.t_grid[a]) tb *= std::pow(c, beta);
      const double ratio = m.value / tb;
      ratios.push_back(ratio);
      if (ratio > sup) {
        sup = ratio;
        sup_se = m.std_error / tb;
      }
    }
    sups.push_back(sup);
    rep.plots["tightness_sup_ratio"].emplace_back(static_cast<double>(nn), sup);
    rungs.push_back({{"n", nn}, {"b_n", sampler.normalizer()}, {"sup_ratio", sup}, {"sup_std_error", sup_se}, {"ratios", ratios}});
  }
  const double ladder_max = *std::max_element(sups.begin(), sups.end());
  const double last = sups.back();
  rep.statistics = {{"beta", beta}, {"p", params.p}, {"hurst", hurst}, {"rungs", rungs}, {"ladder_max", ladder_max},
                    {"last_rung", last}, {"replicas", params.replicas}, {"kernel", kernel_stats(kernel)}};
  rep.criteria.push_back(make_criterion("last_rung_over_ladder_max", ladder_max > 0.0 ? last / ladder_max : 1.0, ">=",
                                        1.0 - params.stabilization));
  return rep;
}

// ---------------------------------------------------------------------------------------------

Report scaling_check(const std::vector<AxisKernel>& families, const ScalingParams& params) {
  if (families.empty()) throw ConfigError("families", "need at least one family");
  if (params.n_ladder.empty()) throw ConfigError("n_ladder", "ladder must be non-empty");
  for (double s : params.s)
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("s", "scale factors must lie in (0,1]");
  Report rep;
  rep.check = "scaling";
  Json fams = Json::array();
  for (const auto& k : families) {
    const double h = k.declared_hurst();
    Json rows = Json::array();
    std::map<double, std::vector<double>> errs;
    for (Index n : params.n_ladder) {
      const AxisWeights full = kernels::axis_weight_table(k, n);
      for (double s : params.s) {
        const Index m = scaled_index(n, s);
        if (m < 1) throw ConfigError("s", "floor(s n) must be >= 1");
        const double ratio = kernels::axis_weight_table(k, m).norm_sq / full.norm_sq;
        const double target = std::pow(s, 2.0 * h);
        const double rel = std::abs(ratio - target) / target;
        errs[s].push_back(rel);
        rows.push_back({{"n", n}, {"s", s}, {"ratio", ratio}, {"target", target}, {"rel_error", rel}});
        rep.plots["scaling_" + k.name() + "_s" + fmt(s)].emplace_back(static_cast<double>(n), rel);
      }
    }
    for (double s : params.s) {
      rep.criteria.push_back(make_criterion(k.name() + " s=" + fmt(s) + " rel_error", errs[s].back(), "<=", params.rel_tol));
      if (params.require_decreasing) {
        double worst = 0.0;
        for (std::size_t i = 1; i < errs[s].size(); ++i) worst = std::max(worst, errs[s][i] - errs[s][i - 1]);
        rep.criteria.push_back(make_criterion(k.name() + " s=" + fmt(s) + " error_increase", worst, "<=", 0.0));
      }
    }
    fams.push_back({{"family", k.name()}, {"declared_hurst", h}, {"truncation_radius", k.truncation_radius()},
                    {"tail_fraction", k.tail_fraction()}, {"rows", rows}});
  }
  rep.statistics = {{"families", fams}, {"n_ladder", params.n_ladder}, {"s", params.s}};
  return rep;
}

Report regularity_check(const std::vector<ProductKernel>& kernel_list, const RegularityParams& params) {
  if (kernel_list.empty()) throw ConfigError("kernels", "need at least one kernel");
  if (params.n_ladder.size() < 2) throw ConfigError("n_ladder", "ladder needs at least two rungs");
  for (Index l : params.l)
    if (l < 1) throw ConfigError("l", "block length must be >= 1");
  Report rep;
  rep.check = "regularity";
  Json out = Json::array();
  for (const auto& kernel : kernel_list) {
    const std::size_t d = kernel.dim();
    std::vector<kernels::WeightTable> tables;
    for (Index n : params.n_ladder) tables.emplace_back(kernel, std::vector<Index>(d, n));
    Json per_l = Json::array();
    for (Index l : params.l) {
      std::vector<kernels::RegularityStats> st;
      Json rows = Json::array();
      for (std::size_t k = 0; k < tables.size(); ++k) {
        st.push_back(kernels::regularity_stats(tables[k], l));
        const auto& s = st.back();
        rows.push_back({{"n", params.n_ladder[k]}, {"cs1", s.cs1}, {"cs2", s.cs2}, {"cs3", s.cs3}, {"block_mass_ratio", s.block_mass_ratio}});
        const std::string tag = kernel.name() + "_l" + std::to_string(l);
        const auto nd = static_cast<double>(params.n_ladder[k]);
        rep.plots["cs1_" + tag].emplace_back(nd, s.cs1);
        rep.plots["cs2_" + tag].emplace_back(nd, s.cs2);
        rep.plots["cs3_" + tag].emplace_back(nd, s.cs3);
      }
      auto worst_step = [&](auto get) {
        double w = 0.0;
        for (std::size_t k = 1; k < st.size(); ++k) {
          const double prev = get(st[k - 1]), cur = get(st[k]);
          // A statistic that is already exactly zero stays at its limit.
          const double ratio = prev > 0.0 ? cur / prev : (cur > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
          w = std::max(w, ratio);
        }
        return w;
      };
      const std::string tag = kernel.name() + " l=" + std::to_string(l);
      rep.criteria.push_back(make_criterion(tag + " cs1 max step ratio", worst_step([](const auto& s) { return s.cs1; }), "<", 1.0));
      rep.criteria.push_back(make_criterion(tag + " cs2 max step ratio", worst_step([](const auto& s) { return s.cs2; }), "<", 1.0));
      rep.criteria.push_back(make_criterion(tag + " cs3 max step ratio", worst_step([](const auto& s) { return s.cs3; }), "<", 1.0));
      rep.criteria.push_back(make_criterion(tag + " |l^d c^2/b^2 - 1| at top rung", std::abs(st.back().block_mass_ratio - 1.0), "<=", params.mass_tol));
      per_l.push_back({{"l", l}, {"rows", rows}});
    }
    out.push_back({{"kernel", kernel.name()}, {"axes", kernel_stats(kernel)}, {"per_l", per_l}});
  }
  rep.statistics = {{"kernels", out}, {"n_ladder", params.n_ladder}};
  return rep;
}

Report sigma_ml_check(const InnovationModel& model, const SigmaMlParams& params) {
  Report rep;
  rep.check = "sigma_ml";
  const double value = sums::sigma_ml(model, params.m, params.l);
  const auto lrv = innovations::long_run_variance(model);
  if (lrv.degenerate) throw DegenerateModelError("long-run variance is zero; relative comparison undefined");
  const double sigma_sq = lrv.value;
  const double rel = std::abs(value - sigma_sq) / sigma_sq;
  const std::size_t d = model.dim();
  const auto iid = InnovationModel::iid(d, model.noise());
  const double iid_value = sums::sigma_ml(iid, params.m, params.l);
  const double iid_expected = std::pow(1.0 - static_cast<double>(params.m + 1) / static_cast<double>(params.l), static_cast<double>(d));
  Json ladder = Json::array();
  for (Index l : params.l_ladder) {
    if (l <= params.m + 1) continue;
    const double v = sums::sigma_ml(model, params.m, l);
    ladder.push_back({{"l", l}, {"sigma_ml", v}, {"rel_error", std::abs(v - sigma_sq) / sigma_sq}});
    rep.plots["sigma_ml_rel_error"].emplace_back(static_cast<double>(l), std::abs(v - sigma_sq) / sigma_sq);
  }
  const Index r = model.filter_radius();
  rep.statistics = {{"m", params.m},
                    {"l", params.l},
                    {"model", model.describe()},
                    {"filter_radius", r},
                    {"m_covers_filter", params.m >= 2 * r},
                    {"sigma_ml", value},
                    {"sigma_sq", sigma_sq},
                    {"rel_error", rel},
                    {"iid_sigma_ml", iid_value},
                    {"iid_expected", iid_expected},
                    {"l_ladder", ladder}};
  rep.criteria.push_back(make_criterion("rel_error", rel, "<=", params.rel_tol));
  rep.criteria.push_back(make_criterion("iid_abs_error", std::abs(iid_value - iid_expected), "<=", params.iid_tol));
  return rep;
}

Report blocking_check(const ProductKernel& kernel, const InnovationModel& model, const BlockingParams& params,
                      const RunContext& ctx) {
  const auto b = sums::blocking_decomposition(kernel, model, params.n, params.m, params.l, params.replicas, ctx.seed,
                                              ctx.budget_bytes);
  Report rep;
  rep.check = "blocking";
  rep.seeds = {{"root", ctx.seed}, {"blocking_stream", streams::kBlocking}};
  const bool covers = params.m >= 2 * model.filter_radius();
  rep.statistics = {{"n", params.n},          {"m", b.m},
                    {"l", b.l},               {"replicas", b.replicas},
                    {"error_ma", b.error_ma}, {"error_avg", b.error_avg},
                    {"error_blk", b.error_blk}, {"se_ma", b.se_ma},
                    {"se_avg", b.se_avg},     {"se_blk", b.se_blk},
                    {"sigma_ml", b.sigma_ml}, {"blk_bound", b.blk_bound},
                    {"m_covers_filter", covers}, {"kernel", kernel_stats(kernel)},
                    {"model", model.describe()}};
  if (covers) rep.criteria.push_back(make_criterion("error_ma", b.error_ma, "==", 0.0));
  rep.criteria.push_back(make_criterion("error_blk_minus_bound_over_se", b.se_blk > 0.0 ? (b.error_blk - b.blk_bound) / b.se_blk : (b.error_blk - b.blk_bound), "<=", params.mc_sigma));
  return rep;
}

Report dependence_check(const InnovationModel& model, const DependenceParams& params, const RunContext& ctx) {
  if (params.p.empty()) throw ConfigError("p", "need at least one p");
  Report rep;
  rep.check = "dependence";
  rep.seeds = {{"root", ctx.seed}, {"dependence_stream", streams::kDependence}, {"bootstrap_stream", streams::kBootstrap}};
  std::vector<double> ps = params.p;
  std::sort(ps.begin(), ps.end());
  Json rows = Json::array();
  std::vector<innovations::DependenceSummary> out;
  for (double p : ps) {
    out.push_back(innovations::dependence_measure(model, p, params.trials, ctx.seed));
    const auto& s = out.back();
    rows.push_back({{"p", p}, {"delta_p", s.delta_p}, {"std_error", s.std_error}, {"exact", s.is_exact}, {"warning", s.warning}});
    rep.plots["delta_p"].emplace_back(p, s.delta_p);
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < out.size(); ++k) {
    const double se = std::sqrt(out[k].std_error * out[k].std_error + out[k - 1].std_error * out[k - 1].std_error);
    const double drop = out[k - 1].delta_p - out[k].delta_p;
    worst = std::max(worst, se > 0.0 ? drop / se : (drop > 0.0 ? std::numeric_limits<double>::infinity() : -1.0));
  }
  const auto lrv = innovations::long_run_variance(model, ctx.seed);
  rep.statistics = {{"model", model.describe()}, {"rows", rows}, {"sigma_sq", lrv.value}, {"sigma_sq_std_error", lrv.std_error},
                    {"sigma_sq_exact", lrv.exact}, {"degenerate", lrv.degenerate}};
  if (out.size() > 1) rep.criteria.push_back(make_criterion("delta_p_decrease_over_se", worst, "<=", params.mc_sigma));
  for (const auto& s : out) rep.criteria.push_back(make_criterion("delta_p_nonnegative p=" + fmt(s.p), s.delta_p, ">=", 0.0));
  return rep;
}

Report oracle_check(const OracleParams& params, const RunContext& ctx) {
  fbs::FbsGrid grid{params.hurst, params.axes};
  try {
    grid.validate();
  } catch (const std::exception& e) {
    throw ConfigError("hurst", e.what());
  }
  Report rep;
  rep.check = "oracle";
  rep.seeds = {{"root", ctx.seed}, {"kronecker_stream", streams::kOracle}, {"dense_stream", streams::kOracleDense}};
  const Eigen::MatrixXd dense = fbs::dense_covariance(grid);
  const Eigen::MatrixXd kron = fbs::kronecker_covariance(grid);
  const double kron_err = (dense - kron).cwiseAbs().maxCoeff();
  const fbs::KroneckerSampler ks(grid);
  const fbs::DenseSampler ds(grid);
  const std::size_t p = grid.size();
  const auto a = stats::second_moments(ks.sample(params.replicas, ctx.seed), p);
  const auto b = stats::second_moments(ds.sample(params.replicas, ctx.seed), p);
  double worst = 0.0, worst_exact = 0.0;
  for (std::size_t k = 0; k < p * p; ++k) {
    const double se = std::sqrt(a.std_error[k] * a.std_error[k] + b.std_error[k] * b.std_error[k]);
    const double diff = std::abs(a.value[k] - b.value[k]);
    worst = std::max(worst, se > 0.0 ? diff / se : (diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
    const double exact = dense(static_cast<Eigen::Index>(k / p), static_cast<Eigen::Index>(k % p));
    if (a.std_error[k] > 0.0) worst_exact = std::max(worst_exact, std::abs(a.value[k] - exact) / a.std_error[k]);
    rep.plots["oracle_kronecker_vs_dense"].emplace_back(b.value[k], a.value[k]);
  }
  std::vector<double> exact(p * p);
  for (std::size_t k = 0; k < p * p; ++k) exact[k] = dense(static_cast<Eigen::Index>(k / p), static_cast<Eigen::Index>(k % p));
  bool jitter = ds.covariance().size() == 0;
  for (std::size_t q = 0; q < grid.dim(); ++q) jitter = jitter || ks.factor(q).cholesky.jittered;
  rep.statistics = {{"hurst", params.hurst},
                    {"axes", params.axes},
                    {"replicas", params.replicas},
                    {"exact_covariance", matrix_json(exact, p)},
                    {"kronecker_empirical", matrix_json(a.value, p)},
                    {"dense_empirical", matrix_json(b.value, p)},
                    {"kronecker_identity_max_abs_error", kron_err},
                    {"kronecker_vs_dense_worst_z", worst},
                    {"kronecker_vs_exact_worst_z", worst_exact},
                    {"jitter_applied", jitter}};
  rep.criteria.push_back(make_criterion("kronecker_identity_max_abs_error", kron_err, "<=", params.kronecker_tol));
  rep.criteria.push_back(make_criterion("kronecker_vs_dense_worst_z", worst, "<=", params.mc_sigma));
  return rep;
}

Report equivalence_check(const EquivalenceParams& params, const RunContext& ctx) {
  if (params.max_dim < 1 || params.max_n < 1 || params.max_radius < 0) throw ConfigError("max_dim", "bounds must be positive");
  Report rep;
  rep.check = "equivalence";
  rep.seeds = {{"root", ctx.seed}, {"sweep_stream", streams::kSweep}};
  Engine engine = make_engine(ctx.seed, streams::kSweep, 0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst_field = 0.0, worst_prefix = 0.0, worst_weights = 0.0;
  std::int64_t done = 0;
  std::array<std::int64_t, 4> by_dim{};
  for (std::int64_t c = 0; c < params.cases; ++c) {
    const auto d = static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(1, params.max_dim)(engine));
    std::vector<AxisKernel> axes;
    std::vector<Index> n(d);
    for (std::size_t q = 0; q < d; ++q) {
      const Index first = std::uniform_int_distribution<Index>(-params.max_radius, params.max_radius)(engine);
      const Index last = std::uniform_int_distribution<Index>(first, params.max_radius)(engine);
      std::vector<double> taps(static_cast<std::size_t>(last - first + 1));
      for (double& t : taps) t = unif(engine);
      axes.push_back(AxisKernel::finite_support(taps, first));
      n[q] = std::uniform_int_distribution<Index>(1, params.max_n)(engine);
    }
    const ProductKernel kernel(axes);
    Field x(sums::weight_support(kernel, n));
    for (double& v : x.values()) v = unif(engine);
    const auto method = static_cast<ConvolutionMethod>(c % 3);
    const Field xi = sums::linear_field(kernel, x, n, method);
    const Field xi_ref = reference::linear_field(kernel, x, n);
    double scale = 1e-300, diff = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k) {
      scale = std::max(scale, std::abs(xi_ref.values()[k]));
      diff = std::max(diff, std::abs(xi.values()[k] - xi_ref.values()[k]));
    }
    worst_field = std::max(worst_field, diff / scale);

    std::vector<Point> grid{Point(d, 1.0)};
    for (int k = 0; k < 5; ++k) {
      Point t(d);
      for (double& v : t) v = 0.5 * (unif(engine) + 1.0);
      grid.push_back(t);
    }
    const auto psp = sums::partial_sum_process(xi, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto m = sums::scaled_corner(n, grid[k]);
      const double direct = reference::box_sum(xi_ref, m);
      const double weights = reference::weighted_sum(kernel, m, x);
      const double s = std::max({std::abs(direct), std::abs(weights), 1.0});
      worst_prefix = std::max(worst_prefix, std::abs(psp.values[k] - direct) / s);
      worst_weights = std::max(worst_weights, std::abs(psp.values[k] - weights) / s);
    }
    ++done;
    ++by_dim[std::min<std::size_t>(d, 3)];
  }
  rep.statistics = {{"cases", done},
                    {"cases_by_dim", {{"1", by_dim[1]}, {"2", by_dim[2]}, {"3", by_dim[3]}}},
                    {"linear_field_max_rel_error", worst_field},
                    {"prefix_vs_box_sum_max_rel_error", worst_prefix},
                    {"prefix_vs_weights_max_rel_error", worst_weights}};
  rep.criteria.push_back(make_criterion("cases", static_cast<double>(done), ">=", static_cast<double>(params.cases)));
  rep.criteria.push_back(make_criterion("linear_field_max_rel_error", worst_field, "<=", params.field_tol));
  rep.criteria.push_back(make_criterion("prefix_vs_box_sum_max_rel_error", worst_prefix, "<=", params.prefix_tol));
  rep.criteria.push_back(make_criterion("prefix_vs_weights_max_rel_error", worst_weights, "<=", params.prefix_tol));
  return rep;
}

Report field_dump_check(const InnovationModel& model, const FieldDumpParams& params, const RunContext& ctx,
                        const std::filesystem::path& output_dir) {
  if (params.n.size() != model.dim()) throw ConfigError("n", "need one entry per axis");
  const Box region = sums::lattice_box(params.n);
  const Field x = innovations::sample_field(model, region, ctx.seed);
  innovations::FieldMetadata meta{region, ctx.seed, model.hash()};
  std::filesystem::create_directories(output_dir);
  const auto stem = output_dir / params.stem;
  innovations::write_field(stem, x, meta);
  innovations::FieldMetadata back_meta;
  const Field back = innovations::read_field(stem, &back_meta);
  double diff = back.box() == x.box() ? 0.0 : std::numeric_limits<double>::infinity();
  if (back.box() == x.box())
    for (std::size_t k = 0; k < x.size(); ++k) diff = std::max(diff, std::abs(back.values()[k] - x.values()[k]));
  Report rep;
  rep.check = "field_dump";
  rep.seeds = {{"root", ctx.seed}, {"field_stream", streams::kField}};
  rep.statistics = {{"region", region.to_string()}, {"model_hash", hex64(model.hash())}, {"sites", x.size()},
                    {"file", params.stem + ".bin"}, {"sample_mean", stats::mean(x.values())}};
  rep.criteria.push_back(make_criterion("round_trip_max_abs_diff", diff, "==", 0.0));
  rep.criteria.push_back(make_criterion("metadata_matches", back_meta.seed == ctx.seed && back_meta.model_hash == model.hash() ? 1.0 : 0.0, "==", 1.0));
  return rep;
}

const std::vector<CheckInfo>& check_catalogue() {
  static const std::vector<CheckInfo> info = {
      {"clt", "S_n/b_n against N(0, sigma^2): Kolmogorov-Smirnov p-value and the first four moments",
       "central limit theorem for regular weights, sigma^2 = sum_k E X_0 X_k"},
      {"fdd", "weight-covariance identity sum_j b_{n,j} b_{n',j} = prod_q 1/2 [b^2_n + b^2_n' - b^2_{|n-n'|}] and the empirical covariance of S_n(t)/b_n against sigma^2 times the fBs covariance",
       "Convergence of finite-dimensional distributions"},
      {"moment_inequality", "||sum a_i X_i||_p <= (2p sum a_i^2)^{1/2} Delta_p over a randomized weight corpus",
       "moment inequality under the physical dependence measure"},
      {"tightness", "sup over t and n of ||S_n(t)||_p^p / (b_n^p prod t_q^beta) stays bounded",
       "tightness moment bound for the partial-sum process, p >= 2 and p > max 1/H_q"},
      {"scaling", "b^2_{floor(s n)}(q) / b^2_n(q) against s^{2 H_q}", "self-similar scaling of the axis norms"},
      {"regularity", "cs1, cs2, cs3 decrease along the n-ladder and l^d c_n^2 / b_n^2 approaches 1",
       "regular coefficients (block-averaging conditions)"},
      {"sigma_ml", "sigma^2_{m,l} from the m-truncated filter against sigma^2", "sigma^2 = lim_m lim_l sigma^2_{m,l}"},
      {"blocking", "norms of the m-approximation, coefficient-averaging and big/small-blocking steps",
       "proof chain of the central limit theorem"},
      {"dependence", "physical dependence measure Delta_p (exact for the linear link, Monte Carlo otherwise)",
       "Delta_p = sum_i ||X_i - X*_i||_p"},
      {"oracle", "Kronecker-factored fBs sampler against a dense Cholesky sampler", "exact covariance of the fractional Brownian sheet"},
      {"equivalence", "linear_field and partial_sum_process against brute-force sums on small random instances",
       "S_n = sum_j b_{n,j} X_j"},
      {"field_dump", "binary field export round trip with sidecar metadata", "innovation field X_i = g(eps_{i-j}: j)"},
  };
  return info;
}

}  // namespace fbslab::verify
