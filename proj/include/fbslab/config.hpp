#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fbslab/innovations.hpp"
#include "fbslab/kernels.hpp"
#include "fbslab/verify.hpp"

namespace fbslab::config {

using verify::Json;

/// {"family": ..., "alpha": ..., "log_power": ..., "taps": [...], "first": k}.
kernels::AxisKernel parse_axis(const Json& j, const kernels::TruncationPolicy& policy, const std::string& path);
/// {"axes": [...], "tail_tol": ..., "max_radius": ...} or the shorthand {"dim": d, "family": ..., ...}.
kernels::ProductKernel parse_kernel(const Json& j, const std::string& path = "kernel");
/// Kernel spec with every default written out.
Json normalize_kernel(const Json& j, const std::string& path = "kernel");

/// {"filter": [{"offset": [...], "weight": w}], "link": ..., "noise": ...}; the default filter is delta_0.
innovations::InnovationModel parse_innovations(const Json& j, std::size_t dim, const std::string& path = "innovations");
Json normalize_innovations(const Json& j, std::size_t dim, const std::string& path = "innovations");

struct Experiment {
  std::uint64_t seed = 0;
  std::string output_dir = "reports";
  std::size_t budget_mb = 2048;
  Json kernel;       // null when absent
  Json innovations;  // null when absent
  std::vector<Json> checks;
};

Experiment parse_experiment(const Json& j);
Experiment load_experiment(const std::filesystem::path& path);

/// A validated check ready to run. `effective` is a complete single-check config: feeding it back
/// through parse_experiment reproduces the same report.
struct PreparedCheck {
  std::size_t index = 0;
  std::string type;
  Json effective;
  std::function<verify::Report(const std::filesystem::path& output_dir)> run;
};

/// Validates every check and builds its objects. Throws ConfigError naming the key.
std::vector<PreparedCheck> prepare(const Experiment& exp);

struct RunResult {
  std::vector<verify::Report> reports;
  std::vector<std::filesystem::path> files;
  bool all_pass = true;
};

/// Runs the checks on up to `jobs` threads, writing NN_<type>.json, summary.csv and plots/*.csv.
RunResult run_experiment(const Experiment& exp, const std::filesystem::path& output_dir, int jobs = 1);

std::string report_stem(const PreparedCheck& c);
void write_report(const std::filesystem::path& file, const verify::Report& report);
void write_summary_csv(const std::filesystem::path& file, const std::vector<std::string>& stems,
                       const std::vector<verify::Report>& reports);
void write_plots(const std::filesystem::path& dir, const std::string& stem, const verify::Report& report);

}  // namespace fbslab::config
