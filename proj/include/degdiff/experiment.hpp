#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "degdiff/ball_sde.hpp"
#include "degdiff/coeffs.hpp"
#include "degdiff/transform.hpp"

namespace degdiff {

enum class ExperimentKind {
    Simulate,
    Couple,
    Sweep,
    Classify,
    VerifyInequalities,
    Occupation,
    TransformCheck,
    Domain,
    PaperTables
};

std::string to_string(ExperimentKind k);
/// Throws ConfigError("experiment", ...) for an unknown name.
ExperimentKind parse_experiment_kind(std::string_view s);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Simulate;
    BallModel model;
    SchemeSpec scheme;

    // numeric block
    double T = 1.0;
    double dt = 1e-4;
    std::size_t replicas = 100;
    std::uint64_t seed = 1;

    // output block
    std::string out_dir = "out";
    unsigned threads = 0;

    struct Simulate {
        double start_depth = 0.0;  // start at (0, .., sqrt(1 - depth))
    } simulate;

    struct Couple {
        double start_depth = 1e-3;
        double partner_depth = 2e-3;
        double angle = 1e-2;
        double p = 0.0;
        double epsilon = 0.0;
        double safety = 1.05;
        double min_held_fraction = 0.99;
    } couple;

    struct Sweep {
        std::vector<double> c_values{0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5};
        double start_depth = 1e-3;
        double partner_depth = 2e-3;
        double angle = 1e-2;
    } sweep;

    struct Classify {
        std::vector<double> r_values{0.25, 0.5, 0.75};
        std::vector<double> c_values{0.5, 1.0, 1.5, 1.9, 2.1, 3.0};
        double reference_point = 0.5;
        double tolerance = 1e-8;
    } classify;

    struct Inequalities {
        std::size_t samples = 100000;
        std::size_t grid = 10000;
    } inequalities;

    struct Occupation {
        std::vector<double> deltas{1e-4, 1e-3, 1e-2, 1e-1};
        double start_depth = 0.0;
    } occupation;

    struct Transform {
        double v_cap = 1e-6;
        double chart_radius = 0.5;
        ChartExit on_exit = ChartExit::Flag;
        double ks_threshold = 0.0;  // 0: max(0.02, 1.95 sqrt(2/N))
    } transform;

    struct Domain {
        std::string shape = "sphere";  // sphere | ellipsoid | expression
        std::vector<double> semi_axes{1.0, 2.0};
        std::string drift = "inward";  // ellipsoid: gradient | inward
        std::string phi, h, sigma = "1";
        std::vector<std::string> b;
        std::vector<double> center;
        double h_neighborhood = 0.0;  // 0: built-in default (0.1 max h)
        std::size_t boundary_samples = 1000;
        std::size_t neighborhood_samples = 20000;
        bool simulate = true;
    } domain;
};

/// Defaults for a subcommand (paper-tables and classify ignore the model block's g).
ExperimentConfig default_config(ExperimentKind kind);

/// Parses YAML text over the defaults of `kind`. Unknown keys, type errors and
/// invalid values throw ConfigError naming the key (e.g. "numeric.dt").
/// An `experiment` entry, when present, must name `kind`.
ExperimentConfig parse_config(std::string_view yaml, ExperimentKind kind);
ExperimentConfig load_config(const std::string& path, ExperimentKind kind);

/// Checks positivity and ranges; throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

/// Canonical YAML of every field the experiment reads; hashing this text gives the config hash.
std::string resolved_yaml(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

std::string sha256_hex(std::string_view data);

struct RunOptions {
    bool quiet = false;
    std::ostream* log = nullptr;  // progress and summary lines; null for none
};

struct RunResult {
    int exit_code = 0;  // 0 ok, 1 assertion failure, 2 config error
    std::string message;
    std::vector<std::string> outputs;  // file names relative to out_dir
    std::string config_hash;
};

/// Runs the experiment, writing CSV/JSON outputs and manifest.json into cfg.out_dir.
/// Every CSV starts with "# config_hash: <hex>".
RunResult run(const ExperimentConfig& cfg, const RunOptions& options = {});

}  // namespace degdiff
