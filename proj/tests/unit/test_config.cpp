#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "fbslab/config.hpp"
#include "fbslab/errors.hpp"

using namespace fbslab;
using namespace fbslab::config;

namespace {

std::string config_error_key(const Json& j) {
  try {
    prepare(parse_experiment(j));
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FBSLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fbslab_config_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const Json kIdentityClt = Json::parse(R"({
  "format_version": 1,
  "seed": 3,
  "kernel": {"dim": 2, "family": "identity"},
  "innovations": {"noise": "gaussian"},
  "checks": [{"type": "clt", "n": [32, 32], "replicas": 500}]
})");

}  // namespace

TEST(ParseKernel, AlphaOutsideWindowNamesPath) {
  const Json j = Json::parse(R"({"axes": [{"family": "fractional_gamma", "alpha": 0.7}]})");
  try {
    parse_kernel(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "kernel.axes[0].alpha");
    EXPECT_NE(std::string(e.what()).find("(0, 1/2)"), std::string::npos);
  }
}

TEST(ParseKernel, ShorthandAndNormalization) {
  const Json j = Json::parse(R"({"dim": 2, "family": "differenced_power", "alpha": 0.25})");
  const auto k = parse_kernel(j);
  EXPECT_EQ(k.dim(), 2u);
  EXPECT_DOUBLE_EQ(k.hurst()[1], 0.25);
  const Json norm = normalize_kernel(j);
  EXPECT_EQ(norm["axes"].size(), 2u);
  EXPECT_TRUE(norm.contains("tail_tol"));
  EXPECT_TRUE(norm.contains("max_radius"));
  const auto again = parse_kernel(norm);
  EXPECT_EQ(again.name(), k.name());
}

TEST(ParseInnovations, DefaultsAndErrors) {
  const auto m = parse_innovations(Json::parse(R"({"noise": "rademacher"})"), 2);
  EXPECT_DOUBLE_EQ(m.filter_sum(), 1.0);
  EXPECT_EQ(m.link(), innovations::Link::Linear);
  const Json bad = Json::parse(R"({"filter": [{"offset": [0], "weight": 1}]})");
  EXPECT_THROW(parse_innovations(bad, 2), ConfigError);
  try {
    parse_innovations(Json::parse(R"({"nosie": "gaussian"})"), 1);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "innovations.nosie");
  }
}

TEST(Prepare, UnknownAndInvalidKeysAreNamed) {
  Json j = kIdentityClt;
  j["checks"][0]["foo"] = 1;
  EXPECT_EQ(config_error_key(j), "checks[0].foo");
  j = kIdentityClt;
  j["checks"][0]["type"] = "nonsense";
  EXPECT_EQ(config_error_key(j), "checks[0].type");
  j = kIdentityClt;
  j["checks"][0]["n"] = {32};
  EXPECT_EQ(config_error_key(j), "checks[0].n");
  j = kIdentityClt;
  j["format_version"] = 2;
  EXPECT_EQ(config_error_key(j), "format_version");
  j = kIdentityClt;
  j["checks"] = Json::parse(R"([{"type": "blocking", "n": [16, 16], "m": 2, "l": 3}])");
  EXPECT_EQ(config_error_key(j), "checks[0].l");
}

TEST(Prepare, EffectiveConfigReproducesReport) {
  const auto prepared = prepare(parse_experiment(kIdentityClt));
  ASSERT_EQ(prepared.size(), 1u);
  EXPECT_EQ(prepared[0].type, "clt");
  const auto dir = scratch("effective");
  const auto first = prepared[0].run(dir);
  const auto replay = prepare(parse_experiment(prepared[0].effective));
  ASSERT_EQ(replay.size(), 1u);
  EXPECT_EQ(replay[0].effective, prepared[0].effective);
  EXPECT_EQ(replay[0].run(dir).to_json(false), first.to_json(false));
  std::filesystem::remove_all(dir);
}

TEST(RunExperiment, WritesReportsAndSummary) {
  const auto dir = scratch("run");
  const auto res = run_experiment(parse_experiment(kIdentityClt), dir, 1);
  ASSERT_EQ(res.reports.size(), 1u);
  EXPECT_TRUE(res.all_pass);
  EXPECT_TRUE(std::filesystem::exists(res.files[0]));
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.csv"));
  std::ifstream in(res.files[0]);
  const Json rep = Json::parse(in);
  EXPECT_EQ(rep["check"], "clt");
  EXPECT_EQ(rep["verdict"]["pass"], true);
  std::filesystem::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  EXPECT_EQ(run_cli("describe-check fdd"), 0);
  EXPECT_EQ(run_cli("describe-check nope"), 2);
  EXPECT_EQ(run_cli("list-kernels"), 0);
  EXPECT_EQ(run_cli("run"), 2);

  {
    std::ofstream(dir / "ok.json") << kIdentityClt.dump();
    Json bad = kIdentityClt;
    bad["kernel"] = Json::parse(R"({"dim": 2, "family": "fractional_gamma", "alpha": 0.7})");
    std::ofstream(dir / "bad.json") << bad.dump();
    Json degenerate = kIdentityClt;
    degenerate["innovations"] = Json::parse(R"({"filter": [{"offset": [0, 0], "weight": 1}, {"offset": [1, 0], "weight": -1}]})");
    std::ofstream(dir / "degenerate.json") << degenerate.dump();
    Json failing = kIdentityClt;
    failing["checks"][0]["ks_pvalue_min"] = 1.0;
    std::ofstream(dir / "failing.json") << failing.dump();
  }
  const std::string out = " --out " + (dir / "out").string();
  EXPECT_EQ(run_cli("run --config " + (dir / "ok.json").string() + out), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "summary.csv"));
  EXPECT_EQ(run_cli("run --config " + (dir / "failing.json").string() + out), 1);
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string() + out), 2);
  EXPECT_EQ(run_cli("run --config " + (dir / "degenerate.json").string() + out), 3);
  EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string() + out), 2);
  std::filesystem::remove_all(dir);
}
