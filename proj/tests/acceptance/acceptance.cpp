#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fbslab/config.hpp"
#include "fbslab/verify.hpp"

namespace {

using fbslab::config::Json;
using Clock = std::chrono::steady_clock;

// Every tolerance, size and seed of the suite is pinned in these configs.

const char* kCltConfig = R"({
  "format_version": 1, "seed": 20240611,
  "kernel": {"dim": 2, "family": "identity"},
  "innovations": {"noise": "gaussian"},
  "checks": [{"type": "clt", "n": [256, 256], "replicas": 10000, "ks_pvalue_min": 0.01, "moment_z_max": 4.0}]
})";

const char* kMomentConfig = R"({
  "format_version": 1, "seed": 20240611,
  "checks": [{"type": "moment_inequality", "dim": 2, "p": [2, 4], "families": 100, "replicas": 5000, "mc_sigma": 3.0,
              "models": [
                {"filter": [{"offset": [0, 0], "weight": 1.0}, {"offset": [1, 0], "weight": 0.5}], "link": "linear", "noise": "gaussian"},
                {"filter": [{"offset": [0, 0], "weight": 1.0}, {"offset": [0, 1], "weight": -0.5}], "link": "tanh", "noise": "rademacher"}]}]
})";

const char* kIdentityConfig = R"({
  "format_version": 1, "seed": 20240611,
  "kernel": {"axes": [{"family": "fractional_gamma", "alpha": 0.2}, {"family": "fractional_gamma", "alpha": 0.3}]},
  "checks": [{"type": "fdd", "n": [256, 256], "stochastic": false, "identity_tol": 1e-10,
              "t_grid": [[0.25, 0.25], [0.25, 0.5], [0.25, 1.0], [0.5, 0.25], [0.5, 0.5], [0.5, 1.0], [1.0, 0.25], [1.0, 0.5], [1.0, 1.0]],
              "identity_pairs": [[0, 0], [0, 4], [1, 5], [2, 7], [3, 8], [4, 4], [5, 6], [6, 8], [8, 8]]}]
})";

const char* kScalingConfig = R"({
  "format_version": 1, "seed": 20240611,
  "checks": [{"type": "scaling", "n_ladder": [16384], "s": [0.25, 0.5, 0.75], "rel_tol": 0.02,
              "families": [{"family": "fractional_gamma", "alpha": 0.2},
                           {"family": "differenced_power", "alpha": 0.2},
                           {"family": "regularly_varying", "alpha": 0.8}]}]
})";

const char* kFddConfig = R"({
  "format_version": 1, "seed": 20240611,
  "kernel": {"axes": [{"family": "fractional_gamma", "alpha": 0.2}, {"family": "fractional_gamma", "alpha": 0.3}]},
  "innovations": {"filter": [{"offset": [0, 0], "weight": 1.0}, {"offset": [1, 0], "weight": 0.5}], "link": "linear", "noise": "gaussian"},
  "checks": [{"type": "fdd", "n": [1024, 1024], "replicas": 4000, "rel_tol": 0.1, "mc_sigma": 4.0,
              "t_grid": [[0.333333333333333, 0.333333333333333], [0.333333333333333, 0.666666666666667], [0.333333333333333, 1.0],
                         [0.666666666666667, 0.333333333333333], [0.666666666666667, 0.666666666666667], [0.666666666666667, 1.0],
                         [1.0, 0.333333333333333], [1.0, 0.666666666666667], [1.0, 1.0]]}]
})";

const char* kSigmaMlConfig = R"({
  "format_version": 1, "seed": 20240611,
  "innovations": {"filter": [{"offset": [0, 0], "weight": 1.0}, {"offset": [1, 0], "weight": 0.5}], "link": "linear", "noise": "gaussian"},
  "checks": [{"type": "sigma_ml", "m": 2, "l": 64, "rel_tol": 0.05, "iid_tol": 1e-12}]
})";

const char* kRegularityConfig = R"({
  "format_version": 1, "seed": 20240611,
  "checks": [{"type": "regularity", "n_ladder": [256, 512, 1024, 2048, 4096], "l": [2, 4, 8], "mass_tol": 0.05,
              "kernels": [
                {"axes": [{"family": "fractional_gamma", "alpha": 0.2}, {"family": "fractional_gamma", "alpha": 0.3}]},
                {"dim": 2, "family": "differenced_power", "alpha": 0.2},
                {"dim": 2, "family": "regularly_varying", "alpha": 0.8},
                {"dim": 2, "family": "log_corrected", "alpha": 0.8}]}]
})";

const char* kOracleConfig = R"({
  "format_version": 1, "seed": 20240611,
  "checks": [{"type": "oracle", "hurst": [0.7, 0.3], "replicas": 100000, "mc_sigma": 4.0,
              "axes": [[0.333333333333333, 0.666666666666667, 1.0], [0.333333333333333, 0.666666666666667, 1.0]]}]
})";

const char* kEquivalenceConfig = R"({
  "format_version": 1, "seed": 20240611,
  "checks": [{"type": "equivalence", "cases": 240, "max_dim": 3, "max_n": 8, "max_radius": 4}]
})";

struct Outcome {
  fbslab::verify::Report report;
  Json effective;
  double seconds = 0.0;
};

Outcome run_config(const Json& j) {
  const auto prepared = fbslab::config::prepare(fbslab::config::parse_experiment(j));
  if (prepared.size() != 1) throw std::logic_error("acceptance configs hold exactly one check");
  const auto dir = std::filesystem::temp_directory_path() / "fbslab_acceptance";
  const auto start = Clock::now();
  Outcome o{prepared[0].run(dir), prepared[0].effective, 0.0};
  o.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return o;
}

bool line(int id, const std::string& name, double value, const std::string& rel, double threshold) {
  const auto c = fbslab::verify::make_criterion(name, value, rel, threshold);
  std::printf("criterion %d: %s  %s = %.6g (need %s %.6g)\n", id, c.pass ? "PASS" : "FAIL", name.c_str(), value, rel.c_str(),
              threshold);
  return c.pass;
}

/// Prints every criterion of the report plus the runtime limit.
bool judge(int id, const char* config, double max_seconds) {
  const auto o = run_config(Json::parse(config));
  bool ok = true;
  for (const auto& c : o.report.criteria) ok &= line(id, c.name, c.value, c.relation, c.threshold);
  ok &= line(id, "runtime_seconds", o.seconds, "<", max_seconds);
  return ok;
}

bool reproducibility() {
  bool ok = true;
  for (const auto& [id, config] : std::vector<std::pair<int, const char*>>{{1, kCltConfig}, {3, kIdentityConfig}, {6, kSigmaMlConfig}}) {
    const auto first = run_config(Json::parse(config));
    const auto replay = run_config(first.effective);
    const bool same = first.report.to_json(false) == replay.report.to_json(false) &&
                      first.report.to_json(false).dump() == replay.report.to_json(false).dump();
    ok &= line(10, "criterion " + std::to_string(id) + " replay from embedded config identical", same ? 1.0 : 0.0, "==", 1.0);
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fbslab acceptance suite"};
  int criterion = 0;
  app.add_option("--criterion", criterion, "criterion to run (1-10)")->required()->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<bool()>> suite{
      [] { return judge(1, kCltConfig, 60.0); },
      [] { return judge(2, kMomentConfig, 600.0); },
      [] { return judge(3, kIdentityConfig, 1.0); },
      [] { return judge(4, kScalingConfig, 5.0); },
      [] { return judge(5, kFddConfig, 1800.0); },
      [] { return judge(6, kSigmaMlConfig, 1.0); },
      [] { return judge(7, kRegularityConfig, 60.0); },
      [] { return judge(8, kOracleConfig, 60.0); },
      [] { return judge(9, kEquivalenceConfig, 60.0); },
      reproducibility,
  };
  try {
    return suite[static_cast<std::size_t>(criterion - 1)]() ? 0 : 1;
  } catch (const std::exception& e) {
    std::printf("criterion %d: FAIL  error: %s\n", criterion, e.what());
    return 1;
  }
}
