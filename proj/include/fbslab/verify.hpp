#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fbslab/innovations.hpp"
#include "fbslab/kernels.hpp"
#include "fbslab/sums.hpp"
#include "json.hpp"

namespace fbslab::verify {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

struct Criterion {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  /// "<=", ">=", "==", "<", ">".
  std::string relation = "<=";
  bool pass = false;
};

Criterion make_criterion(std::string name, double value, std::string relation, double threshold);

struct Report {
  std::string check;
  Json config = Json::object();
  Json statistics = Json::object();
  Json seeds = Json::object();
  std::vector<Criterion> criteria;
  /// Two-column series for plotting: name -> (parameter, statistic) pairs.
  std::map<std::string, std::vector<std::pair<double, double>>> plots;

  bool pass() const;
  /// Sorted keys. The timestamp is the only field that differs between identical runs.
  Json to_json(bool with_timestamp = true) const;
};

struct RunContext {
  std::uint64_t seed = 0;
  std::size_t budget_bytes = std::size_t{2} << 30;
};

struct CltParams {
  std::vector<Index> n;
  std::int64_t replicas = 10000;
  double ks_pvalue_min = 0.01;
  double moment_z_max = 4.0;
  std::optional<double> variance_rel_tol;
  Index near_margin = -1;
};
Report clt_check(const kernels::ProductKernel& kernel, const innovations::InnovationModel& model, const CltParams& params,
                 const RunContext& ctx);

/// sum_j b_{m,j} b_{m',j} both as a direct inner product and through the norm identity.
struct WeightCovarianceIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_error = 0.0;
};
WeightCovarianceIdentity weight_covariance_identity(const kernels::ProductKernel& kernel, std::span<const Index> m,
                                                    std::span<const Index> m_prime);

struct FddParams {
  std::vector<Index> n;
  std::vector<sums::Point> t_grid;
  std::int64_t replicas = 4000;
  double rel_tol = 0.1;
  double mc_sigma = 4.0;
  double identity_tol = 1e-10;
  /// Restrict the identity part to these index pairs into t_grid; empty means all pairs.
  std::vector<std::pair<std::size_t, std::size_t>> identity_pairs;
  bool stochastic = true;
  Index near_margin = -1;
};
Report fdd_check(const kernels::ProductKernel& kernel, const innovations::InnovationModel& model, const FddParams& params,
                 const RunContext& ctx);

struct WeightFamily {
  std::string kind;
  Field weights;
};
/// Randomized weight families: gaussian boxes, sparse signs, constant blocks, geometric
/// decay and small product b-tables.
std::vector<WeightFamily> weight_corpus(std::size_t dim, std::int64_t count, Index max_side, std::uint64_t seed);

struct MomentParams {
  std::vector<double> p = {2.0, 4.0};
  std::int64_t families = 100;
  std::int64_t replicas = 5000;
  double mc_sigma = 3.0;
  Index max_side = 12;
  std::int64_t dependence_trials = 200000;
};
Report moment_inequality_check(const std::vector<innovations::InnovationModel>& models, const MomentParams& params,
                               const RunContext& ctx);

struct TightnessParams {
  std::vector<Index> n_ladder;
  std::vector<sums::Point> t_grid;
  double p = 4.0;
  std::vector<double> gamma;
  std::int64_t replicas = 1000;
  double stabilization = 0.25;
  Index near_margin = -1;
};
/// beta = min_q p (H_q - gamma_q).
double tightness_beta(const std::vector<double>& hurst, double p, const std::vector<double>& gamma);
Report tightness_check(const kernels::ProductKernel& kernel, const innovations::InnovationModel& model,
                       const TightnessParams& params, const RunContext& ctx);

struct ScalingParams {
  std::vector<Index> n_ladder = {1024, 4096, 16384};
  std::vector<double> s = {0.25, 0.5, 0.75};
  double rel_tol = 0.02;
  bool require_decreasing = false;
};
Report scaling_check(const std::vector<kernels::AxisKernel>& families, const ScalingParams& params);

struct RegularityParams {
  std::vector<Index> n_ladder = {256, 512, 1024, 2048, 4096};
  std::vector<Index> l = {2, 4, 8};
  double mass_tol = 0.05;
};
Report regularity_check(const std::vector<kernels::ProductKernel>& kernels, const RegularityParams& params);

struct SigmaMlParams {
  Index m = 2;
  Index l = 64;
  double rel_tol = 0.05;
  double iid_tol = 1e-12;
  std::vector<Index> l_ladder = {16, 32, 64, 128, 256, 512, 1024};
};
Report sigma_ml_check(const innovations::InnovationModel& model, const SigmaMlParams& params);

struct BlockingParams {
  std::vector<Index> n;
  Index m = 2;
  Index l = 8;
  std::int64_t replicas = 200;
  double mc_sigma = 3.0;
};
Report blocking_check(const kernels::ProductKernel& kernel, const innovations::InnovationModel& model,
                      const BlockingParams& params, const RunContext& ctx);

struct DependenceParams {
  std::vector<double> p = {2.0, 4.0};
  std::int64_t trials = 100000;
  double mc_sigma = 3.0;
};
Report dependence_check(const innovations::InnovationModel& model, const DependenceParams& params, const RunContext& ctx);

struct OracleParams {
  std::vector<double> hurst = {0.7, 0.3};
  std::vector<std::vector<double>> axes = {{1.0 / 3.0, 2.0 / 3.0, 1.0}, {1.0 / 3.0, 2.0 / 3.0, 1.0}};
  std::int64_t replicas = 100000;
  double mc_sigma = 4.0;
  double kronecker_tol = 1e-12;
};
Report oracle_check(const OracleParams& params, const RunContext& ctx);

struct EquivalenceParams {
  std::int64_t cases = 200;
  std::size_t max_dim = 3;
  Index max_n = 8;
  Index max_radius = 4;
  double field_tol = 1e-9;
  double prefix_tol = 1e-8;
};
Report equivalence_check(const EquivalenceParams& params, const RunContext& ctx);

struct FieldDumpParams {
  std::vector<Index> n;
  std::string stem = "field";
};
Report field_dump_check(const innovations::InnovationModel& model, const FieldDumpParams& params, const RunContext& ctx,
                        const std::filesystem::path& output_dir);

/// Name, checked statement and anchor text for describe-check.
struct CheckInfo {
  std::string name;
  std::string summary;
  std::string anchor;
};
const std::vector<CheckInfo>& check_catalogue();

}  // namespace fbslab::verify
