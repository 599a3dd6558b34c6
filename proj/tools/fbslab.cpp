#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fbslab/config.hpp"
#include "fbslab/errors.hpp"
#include "fbslab/kernels.hpp"
#include "fbslab/verify.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int run_verb(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed, int jobs,
             std::optional<std::size_t> budget_mb) {
  auto exp = fbslab::config::load_experiment(config_path);
  if (seed) {
    exp.seed = *seed;
    for (auto& c : exp.checks) c.erase("seed");
  }
  if (budget_mb) exp.budget_mb = *budget_mb;
  const std::filesystem::path dir = out.empty() ? std::filesystem::path(exp.output_dir) : std::filesystem::path(out);
  const auto res = fbslab::config::run_experiment(exp, dir, jobs);
  for (std::size_t k = 0; k < res.reports.size(); ++k) {
    const auto& r = res.reports[k];
    std::printf("%-4s %-18s %s\n", r.pass() ? "PASS" : "FAIL", r.check.c_str(), res.files[k].string().c_str());
    for (const auto& c : r.criteria)
      if (!c.pass) std::printf("       %s = %.6g (need %s %.6g)\n", c.name.c_str(), c.value, c.relation.c_str(), c.threshold);
  }
  std::printf("summary: %s\n", (dir / "summary.csv").string().c_str());
  return res.all_pass ? kExitPass : kExitFail;
}

int list_kernels() {
  for (const auto& f : fbslab::kernels::family_catalogue())
    std::printf("%-18s %-34s %s\n", f.name.c_str(), f.parameters.c_str(), f.hurst_rule.c_str());
  return kExitPass;
}

int describe_check(const std::string& name) {
  for (const auto& c : fbslab::verify::check_catalogue())
    if (c.name == name) {
      std::printf("%s\n  checks: %s\n  anchor: %s\n", c.name.c_str(), c.summary.c_str(), c.anchor.c_str());
      return kExitPass;
    }
  std::string known;
  for (const auto& c : fbslab::verify::check_catalogue()) known += " " + c.name;
  std::fprintf(stderr, "error: unknown check '%s'; known:%s\n", name.c_str(), known.c_str());
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fbslab: linear random fields and fractional Brownian sheet limits"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget_mb;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "run the checks listed in a JSON config");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out, "output directory (overrides output_dir)");
  run->add_option("--seed", seed, "root seed (overrides config and per-check seeds)");
  run->add_option("--jobs", jobs, "checks run concurrently")->check(CLI::PositiveNumber);
  run->add_option("--budget-mb", budget_mb, "memory budget per check in MB")->check(CLI::PositiveNumber);

  app.add_subcommand("list-kernels", "list the coefficient families");

  std::string check_name;
  auto* describe = app.add_subcommand("describe-check", "print what a check verifies");
  describe->add_option("name", check_name, "check name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (*run) return run_verb(config_path, out, seed, jobs, budget_mb);
    if (app.got_subcommand("list-kernels")) return list_kernels();
    if (*describe) return describe_check(check_name);
  } catch (const fbslab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const fbslab::UnsupportedOperation& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const fbslab::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitConfig;
}
