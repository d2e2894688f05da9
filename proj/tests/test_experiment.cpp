#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "degdiff/errors.hpp"
#include "degdiff/experiment.hpp"

using namespace degdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("degdiff_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

double fmt_round6(double v) { return std::round(v * 1e6) / 1e6; }

std::string config_error_key(const std::string& yaml, ExperimentKind kind) {
    try {
        parse_config(yaml, kind);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

}  // namespace

TEST(Config, UnknownKeysAreNamed) {
    EXPECT_EQ(config_error_key("numeric:\n  dtt: 0.1\n", ExperimentKind::Sweep), "numeric.dtt");
    EXPECT_EQ(config_error_key("modle:\n  n: 2\n", ExperimentKind::Sweep), "modle");
    EXPECT_EQ(config_error_key("model:\n  gamma: cubic 1\n", ExperimentKind::Sweep), "model.gamma");
    EXPECT_EQ(config_error_key("numeric:\n  dt: -1\n", ExperimentKind::Sweep), "numeric.dt");
    EXPECT_EQ(config_error_key("numeric:\n  replicas: many\n", ExperimentKind::Sweep), "numeric.replicas");
    EXPECT_EQ(config_error_key("experiment: couple\n", ExperimentKind::Sweep), "experiment");
    EXPECT_EQ(config_error_key("sweep:\n  c_values: []\n", ExperimentKind::Sweep), "sweep.c_values");
    EXPECT_EQ(config_error_key("numeric: [1, 2\n", ExperimentKind::Sweep), "<root>");
    EXPECT_THROW(parse_experiment_kind("simulation"), ConfigError);
}

TEST(Config, ParsesBlocks) {
    const auto cfg = parse_config(
        "experiment: sweep\nmodel:\n  n: 3\n  g: affine 1 0.5\n  argument: radial\nnumeric:\n  T: 0.5\n  dt: 0.001\n"
        "  replicas: 7\n  seed: 99\nsweep:\n  c_values: [0.5, 1.5]\n",
        ExperimentKind::Sweep);
    EXPECT_EQ(cfg.model.n, 3);
    EXPECT_EQ(cfg.model.argument, CoeffArgument::Radial);
    EXPECT_DOUBLE_EQ(cfg.model.g(1.0), 1.5);
    EXPECT_DOUBLE_EQ(cfg.T, 0.5);
    EXPECT_EQ(cfg.replicas, 7u);
    EXPECT_EQ(cfg.seed, 99u);
    EXPECT_EQ(cfg.sweep.c_values.size(), 2u);
}

TEST(Config, HashTracksResolvedValues) {
    auto a = default_config(ExperimentKind::Sweep);
    auto b = a;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.dt = a.dt / 2;
    EXPECT_NE(config_hash(a), config_hash(b));
    b = a;
    b.out_dir = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    // The canonical text parses back to the same configuration.
    const auto c = parse_config(resolved_yaml(a), ExperimentKind::Sweep);
    EXPECT_EQ(config_hash(c), config_hash(a));
}

TEST(Sha256, KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Run, SweepWritesOneRowPerCAndManifest) {
    auto cfg = default_config(ExperimentKind::Sweep);
    cfg.out_dir = scratch("sweep").string();
    cfg.T = 0.02;
    cfg.dt = 1e-4;
    cfg.replicas = 4;
    cfg.sweep.c_values = {0.3, 0.5, 0.8284271247461903, 1.0, 1.5};
    const auto res = run(cfg);
    ASSERT_EQ(res.exit_code, 0) << res.message;
    const std::string csv = slurp(fs::path(cfg.out_dir) / "sweep.csv");
    EXPECT_EQ(csv.rfind("# config_hash: " + res.config_hash + "\n", 0), 0u);
    std::istringstream is(csv);
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) rows += (line[0] != '#' && line.rfind("c,", 0) != 0) ? 1 : 0;
    EXPECT_EQ(rows, 5);
    const auto manifest = nlohmann::json::parse(slurp(fs::path(cfg.out_dir) / "manifest.json"));
    EXPECT_EQ(manifest["config_hash"], res.config_hash);
    EXPECT_EQ(manifest["outputs"][0]["file"], "sweep.csv");
    EXPECT_EQ(manifest["outputs"][0]["sha256"], sha256_hex(csv));
}

TEST(Run, VerifyInequalitiesPasses) {
    auto cfg = default_config(ExperimentKind::VerifyInequalities);
    cfg.out_dir = scratch("ineq").string();
    cfg.inequalities.samples = 5000;
    cfg.inequalities.grid = 1000;
    const auto res = run(cfg);
    EXPECT_EQ(res.exit_code, 0) << res.message;
    const auto j = nlohmann::json::parse(slurp(fs::path(cfg.out_dir) / "inequalities.json"));
    EXPECT_TRUE(j["passed"].get<bool>());
}

TEST(Run, UnwritableOutputIsConfigError) {
    const fs::path blocker = scratch("blocker");
    std::ofstream(blocker) << "file";
    auto cfg = default_config(ExperimentKind::VerifyInequalities);
    cfg.out_dir = (blocker / "sub").string();
    EXPECT_EQ(run(cfg).exit_code, 2);
}

TEST(Run, DomainReportsEllipsoidFailure) {
    auto cfg = default_config(ExperimentKind::Domain);
    cfg.out_dir = scratch("domain").string();
    cfg.domain.shape = "ellipsoid";
    cfg.domain.simulate = false;
    EXPECT_EQ(run(cfg).exit_code, 1);
    cfg.domain.shape = "sphere";
    cfg.domain.simulate = true;
    cfg.T = 0.01;
    cfg.dt = 1e-4;
    const auto ok = run(cfg);
    EXPECT_EQ(ok.exit_code, 0) << ok.message;
}

TEST(Run, PaperTablesThresholdRow) {
    auto cfg = default_config(ExperimentKind::PaperTables);
    cfg.out_dir = scratch("tables").string();
    cfg.classify.r_values = {0.5, 0.75};
    cfg.classify.c_values = {1.0};
    cfg.inequalities.samples = 2000;
    cfg.inequalities.grid = 500;
    const auto res = run(cfg);
    ASSERT_EQ(res.exit_code, 0) << res.message;
    const std::string t = slurp(fs::path(cfg.out_dir) / "threshold_constants.csv");
    std::istringstream is(t);
    std::string line;
    std::getline(is, line);
    std::getline(is, line);
    EXPECT_EQ(line, "p_star,F_star,c_star");
    std::getline(is, line);
    double p = 0, f = 0, c = 0;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &p, &f, &c), 3);
    EXPECT_EQ(fmt_round6(p), 0.646447);
    EXPECT_EQ(fmt_round6(f), 0.414214);
    EXPECT_EQ(fmt_round6(c), 0.828427);
    const std::string cls = slurp(fs::path(cfg.out_dir) / "classification_table.csv");
    EXPECT_NE(cls.find("0.5,1,regular,1,"), std::string::npos) << cls;
    EXPECT_NE(cls.find("0.75,1,entrance,0,"), std::string::npos) << cls;
}
