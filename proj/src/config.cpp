#include "fbslab/config.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "fbslab/errors.hpp"
#include "fbslab/fbs_oracle.hpp"

namespace fbslab::config {

using kernels::AxisKernel;
using kernels::ProductKernel;

namespace {

std::string strip_key(const ConfigError& e) {
  const std::string w = e.what();
  const std::string prefix = e.key() + ": ";
  return e.key().empty() || w.rfind(prefix, 0) != 0 ? w : w.substr(prefix.size());
}

/// Re-keys a ConfigError thrown by a factory under `path`.
template <class F>
auto rekey(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    if (e.key().rfind(path, 0) == 0) throw;
    throw ConfigError(e.key().empty() ? path : path + "." + e.key(), strip_key(e));
  }
}

/// Reads typed keys with defaults, records the filled value, and rejects unknown keys.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected a JSON object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  template <class T>
  T get(const std::string& k, T def) {
    seen_.insert(k);
    T v = def;
    if (j_.contains(k) && !j_.at(k).is_null()) {
      try {
        v = j_.at(k).get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(key(k), "wrong type: " + j_.at(k).dump());
      }
    }
    filled_[k] = v;
    return v;
  }

  template <class T>
  T require(const std::string& k) {
    if (!j_.contains(k)) throw ConfigError(key(k), "required key missing");
    return get<T>(k, T{});
  }

  const Json& raw(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }
  void set(const std::string& k, Json v) {
    seen_.insert(k);
    filled_[k] = std::move(v);
  }
  void skip(const std::string& k) { seen_.insert(k); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(key(k), "unknown key");
  }
  const Json& filled() const { return filled_; }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
  Json filled_ = Json::object();
};

void require_positive(const std::vector<Index>& v, const std::string& key) {
  if (v.empty()) throw ConfigError(key, "must be non-empty");
  for (Index x : v)
    if (x < 1) throw ConfigError(key, "entries must be >= 1");
}

void require_dim(const std::vector<Index>& n, std::size_t d, const std::string& key) {
  require_positive(n, key);
  if (n.size() != d) throw ConfigError(key, "need " + std::to_string(d) + " entries, got " + std::to_string(n.size()));
}

void require_grid(const std::vector<sums::Point>& g, std::size_t d, const std::string& key) {
  if (g.empty()) throw ConfigError(key, "grid must be non-empty");
  for (const auto& t : g) {
    if (t.size() != d) throw ConfigError(key, "grid points need " + std::to_string(d) + " coordinates");
    for (double c : t)
      if (!(c > 0.0 && c <= 1.0)) throw ConfigError(key, "grid coordinates must lie in (0, 1]");
  }
}

void require_replicas(std::int64_t r, std::int64_t min, const std::string& key) {
  if (r < min) throw ConfigError(key, "need at least " + std::to_string(min));
}

void require_blocking(Index m, Index l, const std::string& path) {
  if (m < 0) throw ConfigError(path + ".m", "m must be >= 0");
  if (l <= m + 1) throw ConfigError(path + ".l", "need l > m + 1, got l = " + std::to_string(l) + ", m = " + std::to_string(m));
}

void require_fbs(const ProductKernel& k, const std::string& path) {
  if (!k.fbs_eligible())
    throw ConfigError(path, k.name() + " has H outside (0,1)^d; fBs-targeted checks need H in (0,1)^d");
}

std::vector<sums::Point> default_grid(std::size_t d, std::size_t per_axis) {
  std::vector<sums::Point> g;
  const std::size_t total = static_cast<std::size_t>(std::pow(per_axis, d));
  for (std::size_t k = 0; k < total; ++k) {
    sums::Point t(d);
    std::size_t r = k;
    for (std::size_t q = d; q-- > 0;) {
      t[q] = static_cast<double>(r % per_axis + 1) / static_cast<double>(per_axis);
      r /= per_axis;
    }
    g.push_back(t);
  }
  return g;
}

std::size_t infer_dim(const Json& innov) {
  if (innov.is_object()) {
    if (innov.contains("dim") && innov["dim"].is_number_integer()) return innov["dim"].get<std::size_t>();
    if (innov.contains("filter") && innov["filter"].is_array() && !innov["filter"].empty()) {
      const auto& t = innov["filter"][0];
      if (t.is_object() && t.contains("offset") && t["offset"].is_array()) return t["offset"].size();
    }
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------------------------

AxisKernel parse_axis(const Json& j, const kernels::TruncationPolicy& policy, const std::string& path) {
  Reader r(j, path);
  const auto family = rekey(path, [&] { return kernels::family_from_name(r.require<std::string>("family")); });
  AxisKernel k = AxisKernel::identity();
  switch (family) {
    case kernels::Family::FractionalGamma: {
      const double a = r.require<double>("alpha");
      k = rekey(path, [&] { return AxisKernel::fractional_gamma(a, policy); });
      break;
    }
    case kernels::Family::DifferencedPower: {
      const double a = r.require<double>("alpha");
      k = rekey(path, [&] { return AxisKernel::differenced_power(a, policy); });
      break;
    }
    case kernels::Family::RegularlyVarying: {
      const double a = r.require<double>("alpha");
      const double lp = r.get<double>("log_power", 0.0);
      k = rekey(path, [&] { return AxisKernel::regularly_varying(a, lp, policy); });
      break;
    }
    case kernels::Family::LogCorrected: {
      const double a = r.require<double>("alpha");
      k = rekey(path, [&] { return AxisKernel::log_corrected(a, policy); });
      break;
    }
    case kernels::Family::Identity: break;
    case kernels::Family::FiniteSupport: {
      auto taps = r.require<std::vector<double>>("taps");
      const Index first = r.get<Index>("first", 0);
      k = rekey(path, [&] { return AxisKernel::finite_support(std::move(taps), first); });
      break;
    }
  }
  r.finish();
  return k;
}

namespace {

/// Expands the {"dim", "family", ...} shorthand and returns (axes array, policy reader output).
Json expand_axes(Reader& r, const Json& j) {
  if (r.has("axes")) {
    const Json& axes = r.raw("axes");
    if (!axes.is_array() || axes.empty()) throw ConfigError(r.key("axes"), "need a non-empty array of axis specs");
    return axes;
  }
  if (!r.has("family")) throw ConfigError(r.key("axes"), "kernel needs 'axes' or the 'dim'+'family' shorthand");
  const auto d = r.require<std::size_t>("dim");
  if (d < 1) throw ConfigError(r.key("dim"), "must be >= 1");
  Json axis = Json::object();
  for (const char* k : {"family", "alpha", "log_power", "taps", "first"})
    if (j.contains(k)) {
      axis[k] = j.at(k);
      r.skip(k);
    }
  return Json(std::vector<Json>(d, axis));
}

}  // namespace

ProductKernel parse_kernel(const Json& j, const std::string& path) {
  Reader r(j, path);
  kernels::TruncationPolicy policy;
  policy.tail_tol = r.get<double>("tail_tol", policy.tail_tol);
  policy.max_radius = r.get<Index>("max_radius", policy.max_radius);
  if (!(policy.tail_tol > 0.0 && policy.tail_tol < 1.0)) throw ConfigError(r.key("tail_tol"), "must lie in (0, 1)");
  if (policy.max_radius < 1) throw ConfigError(r.key("max_radius"), "must be >= 1");
  const Json axes = expand_axes(r, j);
  r.finish();
  std::vector<AxisKernel> out;
  for (std::size_t q = 0; q < axes.size(); ++q)
    out.push_back(parse_axis(axes[q], policy, path + ".axes[" + std::to_string(q) + "]"));
  return ProductKernel(std::move(out));
}

Json normalize_kernel(const Json& j, const std::string& path) {
  Reader r(j, path);
  kernels::TruncationPolicy policy;
  const double tail = r.get<double>("tail_tol", policy.tail_tol);
  const Index radius = r.get<Index>("max_radius", policy.max_radius);
  const Json axes = expand_axes(r, j);
  r.finish();
  Json out_axes = Json::array();
  for (const auto& a : axes) {
    Json ax = a;
    const std::string fam = ax.value("family", "");
    if (fam == "regularly_varying" && !ax.contains("log_power")) ax["log_power"] = 0.0;
    if (fam == "finite_support" && !ax.contains("first")) ax["first"] = 0;
    out_axes.push_back(ax);
  }
  return {{"axes", out_axes}, {"tail_tol", tail}, {"max_radius", radius}};
}

innovations::InnovationModel parse_innovations(const Json& j, std::size_t dim, const std::string& path) {
  const Json n = normalize_innovations(j, dim, path);
  std::vector<innovations::FilterTap> taps;
  for (std::size_t k = 0; k < n["filter"].size(); ++k) {
    const auto& t = n["filter"][k];
    taps.push_back({t["offset"].get<MultiIndex>(), t["weight"].get<double>()});
  }
  return rekey(path, [&] {
    const auto link = innovations::link_from_name(n["link"].get<std::string>());
    const auto noise = innovations::noise_from_name(n["noise"].get<std::string>());
    return innovations::InnovationModel::from_taps(dim, taps, link, noise);
  });
}

Json normalize_innovations(const Json& j, std::size_t dim, const std::string& path) {
  const Json src = j.is_null() ? Json::object() : j;
  Reader r(src, path);
  const auto link = r.get<std::string>("link", "linear");
  const auto noise = r.get<std::string>("noise", "gaussian");
  rekey(path, [&] {
    (void)innovations::link_from_name(link);
    (void)innovations::noise_from_name(noise);
    return 0;
  });
  if (r.has("dim")) {
    const auto d = r.get<std::size_t>("dim", dim);
    if (d != dim) throw ConfigError(r.key("dim"), "innovation dimension " + std::to_string(d) + " differs from " + std::to_string(dim));
  }
  Json filter = Json::array();
  if (r.has("filter")) {
    const Json& f = r.raw("filter");
    if (!f.is_array() || f.empty()) throw ConfigError(r.key("filter"), "need a non-empty array of taps");
    for (std::size_t k = 0; k < f.size(); ++k) {
      Reader t(f[k], r.key("filter[" + std::to_string(k) + "]"));
      const auto off = t.require<MultiIndex>("offset");
      const auto w = t.require<double>("weight");
      t.finish();
      if (off.size() != dim)
        throw ConfigError(t.key("offset"), "need " + std::to_string(dim) + " coordinates, got " + std::to_string(off.size()));
      if (!std::isfinite(w)) throw ConfigError(t.key("weight"), "must be finite");
      filter.push_back({{"offset", off}, {"weight", w}});
    }
  } else {
    filter.push_back({{"offset", MultiIndex(dim, 0)}, {"weight", 1.0}});
  }
  r.finish();
  return {{"dim", dim}, {"filter", filter}, {"link", link}, {"noise", noise}};
}

// ---------------------------------------------------------------------------------------------

Experiment parse_experiment(const Json& j) {
  Reader r(j, "");
  const int version = r.get<int>("format_version", verify::kFormatVersion);
  if (version != verify::kFormatVersion)
    throw ConfigError("format_version", "unsupported format_version " + std::to_string(version));
  Experiment e;
  e.seed = r.get<std::uint64_t>("seed", 0);
  e.output_dir = r.get<std::string>("output_dir", e.output_dir);
  const auto mb = r.get<std::int64_t>("budget_mb", static_cast<std::int64_t>(e.budget_mb));
  if (mb < 1) throw ConfigError("budget_mb", "must be >= 1");
  e.budget_mb = static_cast<std::size_t>(mb);
  if (r.has("kernel")) e.kernel = r.raw("kernel");
  if (r.has("innovations")) e.innovations = r.raw("innovations");
  if (!r.has("checks")) throw ConfigError("checks", "required key missing");
  const Json& checks = r.raw("checks");
  if (!checks.is_array() || checks.empty()) throw ConfigError("checks", "need a non-empty array of checks");
  for (const auto& c : checks) e.checks.push_back(c);
  r.finish();
  return e;
}

Experiment load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("JSON parse error: ") + e.what());
  }
  return parse_experiment(j);
}

// ---------------------------------------------------------------------------------------------

std::vector<PreparedCheck> prepare(const Experiment& exp) {
  std::vector<PreparedCheck> out;
  for (std::size_t idx = 0; idx < exp.checks.size(); ++idx) {
    const std::string path = "checks[" + std::to_string(idx) + "]";
    Reader r(exp.checks[idx], path);
    const auto type = r.require<std::string>("type");
    const auto seed = r.get<std::uint64_t>("seed", exp.seed);
    verify::RunContext ctx{seed, exp.budget_mb << 20};

    // Kernel and innovations: per-check override or global.
    auto resolve_kernel = [&]() -> std::pair<ProductKernel, Json> {
      Json spec = r.has("kernel") ? r.raw("kernel") : exp.kernel;
      const std::string kpath = r.has("kernel") ? path + ".kernel" : "kernel";
      if (spec.is_null()) throw ConfigError(kpath, "check '" + type + "' needs a kernel");
      Json norm = normalize_kernel(spec, kpath);
      r.skip("kernel");
      return {parse_kernel(norm, kpath), norm};
    };
    auto resolve_innov = [&](std::size_t dim) -> std::pair<innovations::InnovationModel, Json> {
      Json spec = r.has("innovations") ? r.raw("innovations") : exp.innovations;
      const std::string ipath = r.has("innovations") ? path + ".innovations" : "innovations";
      if (dim == 0) dim = infer_dim(spec);
      if (dim == 0 && !exp.kernel.is_null()) dim = normalize_kernel(exp.kernel)["axes"].size();
      if (dim == 0) throw ConfigError(ipath + ".dim", "cannot infer the lattice dimension; give innovations.dim");
      Json norm = normalize_innovations(spec, dim, ipath);
      r.skip("innovations");
      return {parse_innovations(norm, dim, ipath), norm};
    };

    Json eff_kernel, eff_innov;
    std::function<verify::Report(const std::filesystem::path&)> run;

    if (type == "clt") {
      auto [kernel, kj] = resolve_kernel();
      auto [model, ij] = resolve_innov(kernel.dim());
      eff_kernel = kj;
      eff_innov = ij;
      verify::CltParams p;
      p.n = r.require<std::vector<Index>>("n");
      p.replicas = r.get("replicas", p.replicas);
      p.ks_pvalue_min = r.get("ks_pvalue_min", p.ks_pvalue_min);
      p.moment_z_max = r.get("moment_z_max", p.moment_z_max);
      p.near_margin = r.get("near_margin", p.near_margin);
      if (r.has("variance_rel_tol") && !r.raw("variance_rel_tol").is_null())
        p.variance_rel_tol = r.get<double>("variance_rel_tol", 0.0);
      else
        r.set("variance_rel_tol", nullptr);
      require_dim(p.n, kernel.dim(), r.key("n"));
      require_replicas(p.replicas, 10, r.key("replicas"));
      run = [kernel, model, p, ctx](const std::filesystem::path&) { return verify::clt_check(kernel, model, p, ctx); };
    } else if (type == "fdd") {
      auto [kernel, kj] = resolve_kernel();
      auto [model, ij] = resolve_innov(kernel.dim());
      eff_kernel = kj;
      eff_innov = ij;
      require_fbs(kernel, "kernel");
      verify::FddParams p;
      p.n = r.require<std::vector<Index>>("n");
      p.t_grid = r.get("t_grid", default_grid(kernel.dim(), 3));
      p.replicas = r.get("replicas", p.replicas);
      p.rel_tol = r.get("rel_tol", p.rel_tol);
      p.mc_sigma = r.get("mc_sigma", p.mc_sigma);
      p.identity_tol = r.get("identity_tol", p.identity_tol);
      p.identity_pairs = r.get("identity_pairs", p.identity_pairs);
      p.stochastic = r.get("stochastic", p.stochastic);
      p.near_margin = r.get("near_margin", p.near_margin);
      require_dim(p.n, kernel.dim(), r.key("n"));
      require_grid(p.t_grid, kernel.dim(), r.key("t_grid"));
      for (const auto& [a, b] : p.identity_pairs)
        if (a >= p.t_grid.size() || b >= p.t_grid.size()) throw ConfigError(r.key("identity_pairs"), "index out of range");
      if (p.stochastic) require_replicas(p.replicas, 10, r.key("replicas"));
      run = [kernel, model, p, ctx](const std::filesystem::path&) { return verify::fdd_check(kernel, model, p, ctx); };
    } else if (type == "moment_inequality") {
      std::vector<innovations::InnovationModel> models;
      Json models_json = Json::array();
      const std::size_t dim = r.get<std::size_t>("dim", [&] {
        std::size_t d = infer_dim(exp.innovations);
        if (d == 0 && !exp.kernel.is_null()) d = normalize_kernel(exp.kernel)["axes"].size();
        return d == 0 ? std::size_t{2} : d;
      }());
      if (dim < 1) throw ConfigError(r.key("dim"), "must be >= 1");
      if (r.has("models")) {
        const Json& ms = r.raw("models");
        if (!ms.is_array() || ms.empty()) throw ConfigError(r.key("models"), "need a non-empty array of innovation specs");
        for (std::size_t k = 0; k < ms.size(); ++k) {
          const std::string mp = r.key("models[" + std::to_string(k) + "]");
          Json norm = normalize_innovations(ms[k], dim, mp);
          models.push_back(parse_innovations(norm, dim, mp));
          models_json.push_back(norm);
        }
      } else {
        auto [model, ij] = resolve_innov(dim);
        models.push_back(model);
        models_json.push_back(ij);
      }
      r.set("models", models_json);
      verify::MomentParams p;
      p.p = r.get("p", p.p);
      p.families = r.get("families", p.families);
      p.replicas = r.get("replicas", p.replicas);
      p.mc_sigma = r.get("mc_sigma", p.mc_sigma);
      p.max_side = r.get("max_side", p.max_side);
      p.dependence_trials = r.get("dependence_trials", p.dependence_trials);
      for (double v : p.p)
        if (!(v >= 2.0)) throw ConfigError(r.key("p"), "moment inequality needs p >= 2");
      require_replicas(p.replicas, 10, r.key("replicas"));
      require_replicas(p.families, 1, r.key("families"));
      require_replicas(p.dependence_trials, 2, r.key("dependence_trials"));
      if (p.max_side < 2) throw ConfigError(r.key("max_side"), "must be >= 2");
      run = [models, p, ctx](const std::filesystem::path&) { return verify::moment_inequality_check(models, p, ctx); };
    } else if (type == "tightness") {
      auto [kernel, kj] = resolve_kernel();
      auto [model, ij] = resolve_innov(kernel.dim());
      eff_kernel = kj;
      eff_innov = ij;
      require_fbs(kernel, "kernel");
      const std::size_t d = kernel.dim();
      verify::TightnessParams p;
      p.n_ladder = r.get<std::vector<Index>>("n_ladder", {64, 128, 256, 512, 1024});
      p.t_grid = r.get("t_grid", default_grid(d, 4));
      p.p = r.get("p", p.p);
      const auto hurst = kernel.hurst();
      std::vector<double> default_gamma;
      for (double h : hurst) default_gamma.push_back(h - (1.0 + 0.5 * (p.p * h - 1.0)) / p.p);
      p.gamma = r.get("gamma", default_gamma);
      p.replicas = r.get("replicas", p.replicas);
      p.stabilization = r.get("stabilization", p.stabilization);
      p.near_margin = r.get("near_margin", p.near_margin);
      require_positive(p.n_ladder, r.key("n_ladder"));
      require_grid(p.t_grid, d, r.key("t_grid"));
      require_replicas(p.replicas, 10, r.key("replicas"));
      double max_inv_h = 0.0;
      for (double h : hurst) max_inv_h = std::max(max_inv_h, 1.0 / h);
      if (!(p.p >= 2.0) || !(p.p > max_inv_h))
        throw ConfigError(r.key("p"), "need p >= 2 and p > max 1/H_q = " + std::to_string(max_inv_h));
      if (p.gamma.size() != 1 && p.gamma.size() != d) throw ConfigError(r.key("gamma"), "give one gamma or one per axis");
      for (std::size_t q = 0; q < d; ++q) {
        const double g = p.gamma.size() == 1 ? p.gamma[0] : p.gamma[q];
        if (!(g > 0.0 && g < hurst[q])) throw ConfigError(r.key("gamma"), "each gamma_q must lie in (0, H_q)");
      }
      if (!(verify::tightness_beta(hurst, p.p, p.gamma) > 1.0))
        throw ConfigError(r.key("gamma"), "beta = min_q p (H_q - gamma_q) must exceed 1");
      // Rungs whose full lattice does not fit the memory budget are dropped.
      std::vector<Index> kept;
      for (Index n : p.n_ladder) {
        const double bytes = 8.0 * 4.0 * std::pow(static_cast<double>(n), static_cast<double>(d));
        if (bytes <= static_cast<double>(ctx.budget_bytes)) kept.push_back(n);
      }
      if (kept.empty()) throw ConfigError(r.key("n_ladder"), "no rung fits budget_mb");
      if (kept.size() != p.n_ladder.size()) r.set("n_ladder", kept);
      p.n_ladder = kept;
      run = [kernel, model, p, ctx](const std::filesystem::path&) { return verify::tightness_check(kernel, model, p, ctx); };
    } else if (type == "scaling") {
      std::vector<AxisKernel> fams;
      Json fam_json = Json::array();
      kernels::TruncationPolicy policy;
      policy.tail_tol = r.get("tail_tol", policy.tail_tol);
      policy.max_radius = r.get("max_radius", policy.max_radius);
      if (r.has("families")) {
        const Json& fs = r.raw("families");
        if (!fs.is_array() || fs.empty()) throw ConfigError(r.key("families"), "need a non-empty array of axis specs");
        for (std::size_t k = 0; k < fs.size(); ++k) {
          fams.push_back(parse_axis(fs[k], policy, r.key("families[" + std::to_string(k) + "]")));
          fam_json.push_back(fs[k]);
        }
      } else {
        auto [kernel, kj] = resolve_kernel();
        for (std::size_t q = 0; q < kernel.dim(); ++q) {
          fams.push_back(kernel.axis(q));
          fam_json.push_back(kj["axes"][q]);
        }
        eff_kernel = kj;
      }
      r.set("families", fam_json);
      verify::ScalingParams p;
      p.n_ladder = r.get("n_ladder", p.n_ladder);
      p.s = r.get("s", p.s);
      p.rel_tol = r.get("rel_tol", p.rel_tol);
      p.require_decreasing = r.get("require_decreasing", p.require_decreasing);
      require_positive(p.n_ladder, r.key("n_ladder"));
      for (double s : p.s)
        if (!(s > 0.0 && s <= 1.0)) throw ConfigError(r.key("s"), "scale factors must lie in (0, 1]");
      for (Index n : p.n_ladder)
        for (double s : p.s)
          if (scaled_index(n, s) < 1) throw ConfigError(r.key("s"), "floor(s n) must be >= 1 on every rung");
      run = [fams, p](const std::filesystem::path&) { return verify::scaling_check(fams, p); };
    } else if (type == "regularity") {
      std::vector<ProductKernel> ks;
      Json ks_json = Json::array();
      if (r.has("kernels")) {
        const Json& list = r.raw("kernels");
        if (!list.is_array() || list.empty()) throw ConfigError(r.key("kernels"), "need a non-empty array of kernel specs");
        for (std::size_t k = 0; k < list.size(); ++k) {
          const std::string kp = r.key("kernels[" + std::to_string(k) + "]");
          Json norm = normalize_kernel(list[k], kp);
          ks.push_back(parse_kernel(norm, kp));
          ks_json.push_back(norm);
        }
      } else {
        auto [kernel, kj] = resolve_kernel();
        ks.push_back(kernel);
        ks_json.push_back(kj);
      }
      r.set("kernels", ks_json);
      verify::RegularityParams p;
      p.n_ladder = r.get("n_ladder", p.n_ladder);
      p.l = r.get("l", p.l);
      p.mass_tol = r.get("mass_tol", p.mass_tol);
      require_positive(p.n_ladder, r.key("n_ladder"));
      if (p.n_ladder.size() < 2) throw ConfigError(r.key("n_ladder"), "need at least two rungs");
      require_positive(p.l, r.key("l"));
      run = [ks, p](const std::filesystem::path&) { return verify::regularity_check(ks, p); };
    } else if (type == "sigma_ml") {
      auto [model, ij] = resolve_innov(0);
      eff_innov = ij;
      if (!model.is_linear()) throw ConfigError(path + ".innovations.link", "sigma_ml needs the linear link");
      verify::SigmaMlParams p;
      p.m = r.get("m", p.m);
      p.l = r.get("l", p.l);
      p.rel_tol = r.get("rel_tol", p.rel_tol);
      p.iid_tol = r.get("iid_tol", p.iid_tol);
      p.l_ladder = r.get("l_ladder", p.l_ladder);
      require_blocking(p.m, p.l, path);
      run = [model, p](const std::filesystem::path&) { return verify::sigma_ml_check(model, p); };
    } else if (type == "blocking") {
      auto [kernel, kj] = resolve_kernel();
      auto [model, ij] = resolve_innov(kernel.dim());
      eff_kernel = kj;
      eff_innov = ij;
      verify::BlockingParams p;
      p.n = r.require<std::vector<Index>>("n");
      p.m = r.get("m", p.m);
      p.l = r.get("l", p.l);
      p.replicas = r.get("replicas", p.replicas);
      p.mc_sigma = r.get("mc_sigma", p.mc_sigma);
      require_dim(p.n, kernel.dim(), r.key("n"));
      require_blocking(p.m, p.l, path);
      require_replicas(p.replicas, 2, r.key("replicas"));
      double bytes = 24.0;
      for (std::size_t q = 0; q < kernel.dim(); ++q)
        bytes *= static_cast<double>(p.n[q] + kernel.axis(q).hi() - kernel.axis(q).lo() + 2 * p.l);
      if (bytes > static_cast<double>(ctx.budget_bytes))
        throw ConfigError("budget_mb", "blocking needs about " + std::to_string(bytes / 1048576.0) +
                                           " MB for the weight support; lower kernel.max_radius or raise budget_mb");
      run = [kernel, model, p, ctx](const std::filesystem::path&) { return verify::blocking_check(kernel, model, p, ctx); };
    } else if (type == "dependence") {
      auto [model, ij] = resolve_innov(0);
      eff_innov = ij;
      verify::DependenceParams p;
      p.p = r.get("p", p.p);
      p.trials = r.get("trials", p.trials);
      p.mc_sigma = r.get("mc_sigma", p.mc_sigma);
      if (p.p.empty()) throw ConfigError(r.key("p"), "need at least one p");
      for (double v : p.p)
        if (!(v >= 2.0)) throw ConfigError(r.key("p"), "dependence measure needs p >= 2");
      require_replicas(p.trials, 2, r.key("trials"));
      run = [model, p, ctx](const std::filesystem::path&) { return verify::dependence_check(model, p, ctx); };
    } else if (type == "oracle") {
      verify::OracleParams p;
      p.hurst = r.get("hurst", p.hurst);
      p.axes = r.get("axes", p.axes);
      p.replicas = r.get("replicas", p.replicas);
      p.mc_sigma = r.get("mc_sigma", p.mc_sigma);
      p.kronecker_tol = r.get("kronecker_tol", p.kronecker_tol);
      try {
        fbs::FbsGrid{p.hurst, p.axes}.validate();
      } catch (const std::exception& e) {
        throw ConfigError(r.key("hurst"), e.what());
      }
      require_replicas(p.replicas, 10, r.key("replicas"));
      run = [p, ctx](const std::filesystem::path&) { return verify::oracle_check(p, ctx); };
    } else if (type == "equivalence") {
      verify::EquivalenceParams p;
      p.cases = r.get("cases", p.cases);
      p.max_dim = r.get("max_dim", p.max_dim);
      p.max_n = r.get("max_n", p.max_n);
      p.max_radius = r.get("max_radius", p.max_radius);
      p.field_tol = r.get("field_tol", p.field_tol);
      p.prefix_tol = r.get("prefix_tol", p.prefix_tol);
      require_replicas(p.cases, 1, r.key("cases"));
      if (p.max_dim < 1 || p.max_dim > 3) throw ConfigError(r.key("max_dim"), "must lie in [1, 3]");
      if (p.max_n < 1) throw ConfigError(r.key("max_n"), "must be >= 1");
      if (p.max_radius < 0) throw ConfigError(r.key("max_radius"), "must be >= 0");
      run = [p, ctx](const std::filesystem::path&) { return verify::equivalence_check(p, ctx); };
    } else if (type == "field_dump") {
      auto [model, ij] = resolve_innov(0);
      eff_innov = ij;
      verify::FieldDumpParams p;
      p.n = r.require<std::vector<Index>>("n");
      p.stem = r.get("stem", "field_" + std::to_string(idx));
      require_dim(p.n, model.dim(), r.key("n"));
      if (p.stem.empty() || p.stem.find('/') != std::string::npos) throw ConfigError(r.key("stem"), "must be a plain file name");
      run = [model, p, ctx](const std::filesystem::path& dir) { return verify::field_dump_check(model, p, ctx, dir); };
    } else {
      throw ConfigError(r.key("type"), "unknown check type '" + type + "'");
    }
    r.skip("kernel");
    r.skip("innovations");
    r.finish();

    Json check = r.filled();
    Json eff = {{"format_version", verify::kFormatVersion}, {"seed", seed}, {"budget_mb", exp.budget_mb}};
    if (!eff_kernel.is_null()) eff["kernel"] = eff_kernel;
    if (!eff_innov.is_null()) eff["innovations"] = eff_innov;
    eff["checks"] = Json::array({check});

    PreparedCheck pc;
    pc.index = idx;
    pc.type = type;
    pc.effective = eff;
    pc.run = [run, eff, seed](const std::filesystem::path& dir) {
      verify::Report rep = run(dir);
      rep.config = eff;
      if (rep.seeds.is_null() || rep.seeds.empty()) rep.seeds = {{"root", seed}};
      return rep;
    };
    out.push_back(std::move(pc));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

std::string report_stem(const PreparedCheck& c) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu_", c.index);
  return buf + c.type;
}

void write_report(const std::filesystem::path& file, const verify::Report& report) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << report.to_json().dump(2) << '\n';
}

void write_summary_csv(const std::filesystem::path& file, const std::vector<std::string>& stems,
                       const std::vector<verify::Report>& reports) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "report,check,criterion,value,relation,threshold,pass\n";
  out.precision(17);
  for (std::size_t k = 0; k < reports.size(); ++k)
    for (const auto& c : reports[k].criteria) {
      std::string name = c.name;
      std::replace(name.begin(), name.end(), ',', ';');
      out << stems[k] << ',' << reports[k].check << ',' << name << ',' << c.value << ',' << c.relation << ','
          << c.threshold << ',' << (c.pass ? "true" : "false") << '\n';
    }
}

void write_plots(const std::filesystem::path& dir, const std::string& stem, const verify::Report& report) {
  if (report.plots.empty()) return;
  std::filesystem::create_directories(dir);
  for (const auto& [name, series] : report.plots) {
    std::string safe = name;
    for (char& ch : safe)
      if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '.' && ch != '-') ch = '_';
    std::ofstream out(dir / (stem + "_" + safe + ".csv"));
    out.precision(17);
    out << "parameter,statistic\n";
    for (const auto& [x, y] : series) out << x << ',' << y << '\n';
  }
}

RunResult run_experiment(const Experiment& exp, const std::filesystem::path& output_dir, int jobs) {
  const auto checks = prepare(exp);
  std::filesystem::create_directories(output_dir);
  RunResult res;
  res.reports.resize(checks.size());
  res.files.resize(checks.size());
  std::vector<std::string> stems(checks.size());
  std::vector<std::exception_ptr> errors(checks.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t k; (k = next++) < checks.size();) {
      try {
        auto rep = checks[k].run(output_dir);
        std::lock_guard lock(io);
        stems[k] = report_stem(checks[k]);
        res.files[k] = output_dir / (stems[k] + ".json");
        write_report(res.files[k], rep);
        write_plots(output_dir / "plots", stems[k], rep);
        res.reports[k] = std::move(rep);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(checks.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  write_summary_csv(output_dir / "summary.csv", stems, res.reports);
  res.all_pass = std::all_of(res.reports.begin(), res.reports.end(), [](const verify::Report& r) { return r.pass(); });
  return res;
}

}  // namespace fbslab::config
