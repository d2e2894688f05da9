#include "degdiff/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "degdiff/coupling.hpp"
#include "degdiff/errors.hpp"
#include "degdiff/general_domain.hpp"
#include "degdiff/inequalities.hpp"
#include "degdiff/parallel.hpp"
#include "degdiff/radial.hpp"
#include "degdiff/rng.hpp"
#include "degdiff/stats.hpp"

namespace degdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct KindName {
    ExperimentKind kind;
    std::string_view name;
};
constexpr KindName kKinds[] = {
    {ExperimentKind::Simulate, "simulate"},
    {ExperimentKind::Couple, "couple"},
    {ExperimentKind::Sweep, "sweep"},
    {ExperimentKind::Classify, "classify"},
    {ExperimentKind::VerifyInequalities, "verify-inequalities"},
    {ExperimentKind::Occupation, "occupation"},
    {ExperimentKind::TransformCheck, "transform-check"},
    {ExperimentKind::Domain, "domain"},
    {ExperimentKind::PaperTables, "paper-tables"},
};

std::string num(double v) { return fmt::format("{}", v); }

// ---------------------------------------------------------------- YAML input

std::string join_key(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void check_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
    if (!node.IsMap()) throw ConfigError(path.empty() ? "<root>" : path, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw ConfigError(join_key(path, key), "unknown key");
    }
}

template <class T>
void read(const YAML::Node& node, const std::string& path, const char* key, T& target) {
    const YAML::Node v = node[key];
    if (!v) return;
    try {
        target = v.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(join_key(path, key), "value has the wrong type");
    }
}

void read_coeff(const YAML::Node& node, const std::string& path, const char* key, CoeffFn& target) {
    std::string text;
    read(node, path, key, text);
    if (text.empty()) return;
    try {
        target = CoeffFn::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(join_key(path, key), e.what());
    }
}

void parse_model(const YAML::Node& node, ExperimentConfig& cfg) {
    check_keys(node, "model",
               {"n", "r", "gamma", "g", "argument", "scheme", "substep_radius", "substep_factor"});
    read(node, "model", "n", cfg.model.n);
    read(node, "model", "r", cfg.model.r);
    read_coeff(node, "model", "gamma", cfg.model.gamma);
    read_coeff(node, "model", "g", cfg.model.g);
    std::string s;
    read(node, "model", "argument", s);
    if (!s.empty()) {
        try {
            cfg.model.argument = parse_coeff_argument(s);
        } catch (const std::exception& e) {
            throw ConfigError("model.argument", e.what());
        }
    }
    s.clear();
    read(node, "model", "scheme", s);
    if (!s.empty()) {
        try {
            cfg.scheme.kind = parse_scheme_kind(s);
        } catch (const std::exception& e) {
            throw ConfigError("model.scheme", e.what());
        }
    }
    read(node, "model", "substep_radius", cfg.scheme.substep_radius);
    read(node, "model", "substep_factor", cfg.scheme.substep_factor);
}

void parse_block(const YAML::Node& root, const char* name, ExperimentConfig& cfg) {
    const YAML::Node node = root[name];
    if (!node) return;
    const std::string p = name;
    if (p == "numeric") {
        check_keys(node, p, {"T", "dt", "replicas", "seed"});
        read(node, p, "T", cfg.T);
        read(node, p, "dt", cfg.dt);
        read(node, p, "replicas", cfg.replicas);
        read(node, p, "seed", cfg.seed);
    } else if (p == "output") {
        check_keys(node, p, {"dir", "threads"});
        read(node, p, "dir", cfg.out_dir);
        read(node, p, "threads", cfg.threads);
    } else if (p == "simulate") {
        check_keys(node, p, {"start_depth"});
        read(node, p, "start_depth", cfg.simulate.start_depth);
    } else if (p == "couple") {
        check_keys(node, p, {"start_depth", "partner_depth", "angle", "p", "epsilon", "safety", "min_held_fraction"});
        auto& c = cfg.couple;
        read(node, p, "start_depth", c.start_depth);
        read(node, p, "partner_depth", c.partner_depth);
        read(node, p, "angle", c.angle);
        read(node, p, "p", c.p);
        read(node, p, "epsilon", c.epsilon);
        read(node, p, "safety", c.safety);
        read(node, p, "min_held_fraction", c.min_held_fraction);
    } else if (p == "sweep") {
        check_keys(node, p, {"c_values", "start_depth", "partner_depth", "angle"});
        read(node, p, "c_values", cfg.sweep.c_values);
        read(node, p, "start_depth", cfg.sweep.start_depth);
        read(node, p, "partner_depth", cfg.sweep.partner_depth);
        read(node, p, "angle", cfg.sweep.angle);
    } else if (p == "classify") {
        check_keys(node, p, {"r_values", "c_values", "reference_point", "tolerance"});
        read(node, p, "r_values", cfg.classify.r_values);
        read(node, p, "c_values", cfg.classify.c_values);
        read(node, p, "reference_point", cfg.classify.reference_point);
        read(node, p, "tolerance", cfg.classify.tolerance);
    } else if (p == "inequalities") {
        check_keys(node, p, {"samples", "grid"});
        read(node, p, "samples", cfg.inequalities.samples);
        read(node, p, "grid", cfg.inequalities.grid);
    } else if (p == "occupation") {
        check_keys(node, p, {"deltas", "start_depth"});
        read(node, p, "deltas", cfg.occupation.deltas);
        read(node, p, "start_depth", cfg.occupation.start_depth);
    } else if (p == "transform") {
        check_keys(node, p, {"v_cap", "chart_radius", "on_exit", "ks_threshold"});
        read(node, p, "v_cap", cfg.transform.v_cap);
        read(node, p, "chart_radius", cfg.transform.chart_radius);
        read(node, p, "ks_threshold", cfg.transform.ks_threshold);
        std::string s;
        read(node, p, "on_exit", s);
        if (s == "stop")
            cfg.transform.on_exit = ChartExit::Stop;
        else if (s == "flag")
            cfg.transform.on_exit = ChartExit::Flag;
        else if (!s.empty())
            throw ConfigError("transform.on_exit", "expected stop or flag");
    } else if (p == "domain") {
        check_keys(node, p,
                   {"shape", "semi_axes", "drift", "phi", "h", "sigma", "b", "center", "h_neighborhood",
                    "boundary_samples", "neighborhood_samples", "simulate"});
        auto& d = cfg.domain;
        read(node, p, "shape", d.shape);
        read(node, p, "semi_axes", d.semi_axes);
        read(node, p, "drift", d.drift);
        read(node, p, "phi", d.phi);
        read(node, p, "h", d.h);
        read(node, p, "sigma", d.sigma);
        read(node, p, "b", d.b);
        read(node, p, "center", d.center);
        read(node, p, "h_neighborhood", d.h_neighborhood);
        read(node, p, "boundary_samples", d.boundary_samples);
        read(node, p, "neighborhood_samples", d.neighborhood_samples);
        read(node, p, "simulate", d.simulate);
    }
}

// --------------------------------------------------------------- YAML output

template <class T>
void emit_list(YAML::Emitter& e, const char* key, const std::vector<T>& v) {
    e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& x : v) {
        if constexpr (std::is_same_v<T, double>)
            e << num(x);
        else
            e << x;
    }
    e << YAML::EndSeq;
}

void emit(YAML::Emitter& e, const char* key, double v) { e << YAML::Key << key << YAML::Value << num(v); }
void emit(YAML::Emitter& e, const char* key, const std::string& v) { e << YAML::Key << key << YAML::Value << v; }
template <class I>
    requires std::is_integral_v<I>
void emit(YAML::Emitter& e, const char* key, I v) {
    e << YAML::Key << key << YAML::Value << std::to_string(v);
}

// -------------------------------------------------------------- file output

class OutputSet {
public:
    OutputSet(const ExperimentConfig& cfg, std::string hash) : dir_(cfg.out_dir), hash_(std::move(hash)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw ConfigError("output.dir", "cannot create " + dir_.string());
    }

    void csv(const std::string& name, const std::string& body) { write(name, "# config_hash: " + hash_ + "\n" + body); }
    void json_file(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    const std::vector<std::string>& names() const { return names_; }
    const std::vector<std::string>& hashes() const { return hashes_; }
    const fs::path& dir() const { return dir_; }

    void write(const std::string& name, const std::string& content) {
        std::ofstream f(dir_ / name, std::ios::binary);
        if (!f) throw ConfigError("output.dir", "cannot write " + (dir_ / name).string());
        f << content;
        if (!f) throw ConfigError("output.dir", "write failed for " + (dir_ / name).string());
        names_.push_back(name);
        hashes_.push_back(sha256_hex(content));
    }

private:
    fs::path dir_;
    std::string hash_;
    std::vector<std::string> names_, hashes_;
};

struct Outcome {
    bool passed = true;
    std::string message;
    json summary = json::object();
};

void say(const RunOptions& o, const std::string& line) {
    if (!o.quiet && o.log) *o.log << line << '\n';
}

Eigen::VectorXd pole_start(int n, double depth) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x(n - 1) = std::sqrt(1.0 - depth);
    return x;
}

// ------------------------------------------------------------- experiments

Outcome run_simulate(const ExperimentConfig& cfg, OutputSet& out, const RunOptions& o) {
    const Eigen::VectorXd x0 = pole_start(cfg.model.n, cfg.simulate.start_depth);
    const auto tag = hash_tag("simulate");
    const Trajectory traj = simulate(cfg.model, x0, cfg.T, cfg.dt, derive_seed(cfg.seed, {tag, 0}), cfg.scheme);
    std::ostringstream path;
    write_trajectory_csv(path, traj, cfg.model);
    out.csv("trajectory.csv", path.str());

    const std::size_t steps = step_count(cfg.T, cfg.dt);
    Eigen::MatrixXd finals(cfg.model.n, static_cast<Eigen::Index>(cfg.replicas));
    parallel_for(cfg.replicas, cfg.threads, [&](std::size_t i) {
        GaussianStream noise(derive_seed(cfg.seed, {tag, i}));
        Eigen::VectorXd x = x0;
        advance_path(cfg.model, x, steps, cfg.dt, cfg.scheme, noise, [](std::size_t, const auto&, const auto&) {});
        finals.col(static_cast<Eigen::Index>(i)) = x;
    });
    std::ostringstream fin;
    fin << "replica";
    for (int i = 1; i <= cfg.model.n; ++i) fin << ",x_" << i;
    fin << ",Y\n";
    RunningStats ys;
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
        const auto col = finals.col(static_cast<Eigen::Index>(r));
        fmt::print(fin, "{}", r);
        for (Eigen::Index i = 0; i < col.size(); ++i) fmt::print(fin, ",{:.17g}", col(i));
        const double y = radial_value(col);
        fmt::print(fin, ",{:.17g}\n", y);
        ys.add(y);
    }
    out.csv("final_states.csv", fin.str());
    say(o, fmt::format("simulate: {} replicas, mean Y_T = {:.6g} (se {:.2g})", cfg.replicas, ys.mean(), ys.std_error()));
    Outcome res;
    res.summary = {{"replicas", cfg.replicas}, {"steps", steps}, {"mean_Y_T", ys.mean()}, {"se_Y_T", ys.std_error()}};
    return res;
}

Outcome run_couple(const ExperimentConfig& cfg, OutputSet& out, const RunOptions& o) {
    const auto& c = cfg.couple;
    const auto [x0, xt0] = coupled_starts(cfg.model.n, c.start_depth, c.partner_depth, c.angle);
    CoupledOptions opt;
    opt.p = c.p;
    opt.epsilon = c.epsilon;
    opt.safety = c.safety;
    opt.scheme = cfg.scheme;
    const auto tag = hash_tag("couple");
    std::vector<CoupledDiagnostics> diag(cfg.replicas);
    parallel_for(cfg.replicas, cfg.threads, [&](std::size_t i) {
        CoupledOptions local = opt;
        local.record_steps = i == 0;
        diag[i] = run_coupled(cfg.model, x0, xt0, cfg.T, cfg.dt, derive_seed(cfg.seed, {tag, i}), local);
    });

    const auto& d0 = diag.front();
    std::ostringstream path;
    path << "k,t,W,Z,I1,I2,I3,I4,I5,prod1,prod2,K_negative\n";
    for (std::size_t k = 0; k < d0.W.size(); ++k)
        fmt::print(path, "{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", k,
                   static_cast<double>(k) * cfg.dt, d0.W[k], d0.Z[k], d0.I1[k], d0.I2[k], d0.I3[k], d0.I4[k],
                   d0.I5[k], d0.prod1[k], d0.prod2[k], static_cast<int>(d0.K_negative[k]));
    out.csv("coupled_path.csv", path.str());

    std::ostringstream summ;
    summ << "replica,tau_index,W0,sup_W,int_lhs,int_dist2,worst_ratio,inequality_held,initial_distance,"
            "final_distance\n";
    std::size_t held = 0;
    for (std::size_t i = 0; i < diag.size(); ++i) {
        const auto& d = diag[i];
        held += d.inequality_held ? 1 : 0;
        fmt::print(summ, "{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g},{:.17g}\n", i, d.tau_index, d.W0,
                   d.sup_W, d.int_lhs, d.int_dist2, d.worst_ratio, d.inequality_held ? 1 : 0, d.initial_distance,
                   d.final_distance);
    }
    out.csv("coupled_summary.csv", summ.str());
    const double frac = static_cast<double>(held) / static_cast<double>(diag.size());
    Outcome res;
    res.summary = {{"p", d0.p},
                   {"eps", d0.eps},
                   {"C_hat", d0.C_hat},
                   {"K_contracting", d0.K_contracting},
                   {"held_fraction", frac}};
    // The integral inequality is only asserted where the shell constants make K negative.
    if (d0.K_contracting && frac < c.min_held_fraction) {
        res.passed = false;
        res.message = fmt::format("pathwise inequality held on {:.4f} of paths (< {})", frac, c.min_held_fraction);
    }
    say(o, fmt::format("couple: p={:.6g} eps={:.4g} C_hat={:.4g} contracting={} held={:.4f}", d0.p, d0.eps, d0.C_hat,
                       d0.K_contracting, frac));
    return res;
}

Outcome run_sweep(const ExperimentConfig& cfg, OutputSet& out, const RunOptions& o) {
    SweepOptions so;
    so.c_values = cfg.sweep.c_values;
    so.T = cfg.T;
    so.dt = cfg.dt;
    so.replicas = cfg.replicas;
    so.seed = cfg.seed;
    so.start_depth = cfg.sweep.start_depth;
    so.partner_depth = cfg.sweep.partner_depth;
    so.angle = cfg.sweep.angle;
    so.threads = cfg.threads;
    const auto rows = threshold_sweep(cfg.model, so);
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    out.csv("sweep.csv", csv.str());
    Outcome res;
    res.summary["rows"] = rows.size();
    for (const auto& r : rows)
        say(o, fmt::format("sweep: c={:<8.6g} median={:.4g} p95={:.4g} held={:.3f} regime={}", r.c, r.median_ratio,
                           r.p95_ratio, r.ineq_held_fraction, to_string(r.regime)));
    return res;
}

struct ClassRow {
    double r, c;
    BoundaryClassification cls;
};

std::vector<ClassRow> classification_table(const ExperimentConfig& cfg, const std::vector<double>& rs,
                                           const std::vector<double>& cs) {
    FellerOptions fo;
    fo.reference_point = cfg.classify.reference_point;
    fo.tolerance = cfg.classify.tolerance;
    std::vector<ClassRow> rows(rs.size() * cs.size());
    parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
        RadialModel m;
        m.n = cfg.model.n;
        m.r = rs[i / cs.size()];
        m.gamma = cfg.model.gamma;
        m.g = CoeffFn::constant(cs[i % cs.size()]);
        rows[i] = {m.r, cs[i % cs.size()], classify_boundary(m, fo)};
    });
    return rows;
}

std::string classification_csv(const std::vector<ClassRow>& rows) {
    std::ostringstream csv;
    csv << "r,c,verdict,attainable,attainability,attainability_divergent,entrance,entrance_divergent\n";
    for (const auto& row : rows)
        fmt::print(csv, "{},{},{},{},{:.17g},{},{:.17g},{}\n", row.r, row.c, to_string(row.cls.verdict),
                   row.cls.attainable() ? 1 : 0, row.cls.attainability.value, row.cls.attainability.divergent ? 1 : 0,
                   row.cls.entrance.value, row.cls.entrance.divergent ? 1 : 0);
    return csv.str();
}

Outcome run_classify(const ExperimentConfig& cfg, OutputSet& out, const RunOptions& o) {
    const auto rows = classification_table(cfg, cfg.classify.r_values, cfg.classify.c_values);
    out.csv("classification.csv", classification_csv(rows));
    json arr = json::array();
    std::size_t inconclusive = 0;
    for (const auto& row : rows) {
        json j = json::parse(row.cls.to_json());
        j["r"] = row.r;
        j["c"] = row.c;
        arr.push_back(std::move(j));
        if (row.cls.verdict == BoundaryVerdict::Inconclusive) ++inconclusive;
        say(o, fmt::format("classify: r={:<5} c={:<5} {}", row.r, row.c, to_string(row.cls.verdict)));
    }
    out.json_file("classification.json", arr);
    Outcome res;
    res.summary = {{"rows", rows.size()}, {"inconclusive", inconclusive}};
    if (inconclusive > 0) {
        res.passed = false;
        res.message = fmt::format("{} classifications were inconclusive", inconclusive);
    }
    return res;
}

Outcome run_inequalities(const ExperimentConfig& cfg, OutputSet& out, const RunOptions& o) {
    InequalitySuiteOptions io;
    io.samples = cfg.inequalities.samples;
    io.grid = cfg.inequalities.grid;
    io.seed = derive_seed(cfg.seed, {hash_tag("verify-inequalities")});
    const auto rep = verify_inequalities(io);
    out.json_file("inequalities.json", json::parse(rep.json));
    Outcome res;
    res.passed = rep.passed;
    if (!rep.passed) res.message = "an inequality check failed; see inequalities.json";
    res.summary["passed"] = rep.passed;
    say(o, fmt::format("verify-inequalities: {}", rep.passed ? "all checks passed" : "FAILED"));
    return res;
}

Outcome run_occupation(const ExperimentConfig& cfg, OutputSet& out, const RunOptions& o) {
    const auto& deltas = cfg.occupation.deltas;
    const std::size_t steps = step_count(cfg.T, cfg.dt);
    const Eigen::VectorXd x0 = pole_start(cfg.model.n, cfg.occupation.start_depth);
    const auto tag = hash_tag("occupation");
    std::vector<std::vector<double>> frac(cfg.replicas, std::vector<double>(deltas.size()));
    parallel_for(cfg.replicas, cfg.threads, [&](std::size_t i) {
        GaussianStream noise(derive_seed(cfg.seed, {tag, i}));
        Eigen::VectorXd x = x0;
        std::vector<std::size_t> hits(deltas.size(), 0);
        auto count = [&](const Eigen::VectorXd& s) {
            const double y = radial_value(s);
            for (std::size_t j = 0; j < deltas.size(); ++j) hits[j] += y <= deltas[j] ? 1 : 0;
        };
        count(x);
        advance_path(cfg.model, x, steps, cfg.dt, cfg.scheme, noise,
                     [&](std::size_t, const Eigen::VectorXd& s, const Eigen::VectorXd&) { count(s); });
        for (std::size_t j = 0; j < deltas.size(); ++j)
            frac[i][j] = static_cast<double>(hits[j]) / static_cast<double>(steps + 1);
    });
    std::ostringstream csv;
    csv << "delta,mean_fraction,std_error,replicas\n";
    std::vector<double> lx, ly;
    json rows = json::array();
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        RunningStats s;
        for (std::size_t i = 0; i < cfg.replicas; ++i) s.add(frac[i][j]);
        fmt::print(csv, "{:.17g},{:.17g},{:.17g},{}\n", deltas[j], s.mean(), s.std_error(), cfg.replicas);
        if (s.mean() > 0.0) {
            lx.push_back(std::log(deltas[j]));
            ly.push_back(std::log(s.mean()));
        }
        rows.push_back({{"delta", deltas[j]}, {"mean_fraction", s.mean()}, {"std_error", s.std_error()}});
        say(o, fmt::format("occupation: delta={:<8.3g} fraction={:.6g} (se {:.2g})", deltas[j], s.mean(),
                           s.std_error()));
    }
    out.csv("occupation.csv", csv.str());
    Outcome res;
    res.summary["rows"] = rows;
    if (lx.size() >= 2) {
        const double slope = fit_slope(lx, ly);
        res.summary["log_log_slope"] = slope;
        say(o, fmt::format("occupation: log-log slope {:.4f}", slope));
    }
    return res;
}

Outcome run_transform_check(const ExperimentConfig& cfg, OutputSet& out, const RunOptions& o) {
    require_v_coefficients(cfg.model);
    const RadialModel radial = RadialModel::from_ball(cfg.model);
    const std::size_t steps = step_count(cfg.T, cfg.dt);
    const int n = cfg.model.n;
    const Eigen::VectorXd x0 = pole_start(n, 0.0);
    TransformOptions topt;
    topt.v_cap = cfg.transform.v_cap;
    topt.chart_radius = cfg.transform.chart_radius;
    topt.on_exit = cfg.transform.on_exit;
    topt.record = false;
    const auto tag = hash_tag("transform-check");
    const std::size_t N = cfg.replicas;
    std::vector<double> ball(N), rad(N), tr(N);
    std::vector<unsigned char> truncated(N);
    parallel_for(N, cfg.threads, [&](std::size_t i) {
        GaussianStream nb(derive_seed(cfg.seed, {tag, hash_tag("ball"), i}));
        Eigen::VectorXd x = x0;
        advance_path(cfg.model, x, steps, cfg.dt, cfg.scheme, nb, [](std::size_t, const auto&, const auto&) {});
        ball[i] = radial_value(x);

        GaussianStream nr(derive_seed(cfg.seed, {tag, hash_tag("radial"), i}));
        double v = 0.0;
        const double sdt = std::sqrt(cfg.dt);
        for (std::size_t k = 0; k < steps; ++k) v = radial_step(radial, v, cfg.dt, sdt * nr());
        rad[i] = v;

        GaussianStream nt(derive_seed(cfg.seed, {tag, hash_tag("transform"), i}));
        const auto p = simulate_transformed_with(cfg.model, 0.0, Eigen::VectorXd::Zero(n - 1), steps, cfg.dt, nt, topt);
        tr[i] = p.final_v;
        truncated[i] = p.truncation ? 1 : 0;
    });
    std::vector<double> tr_kept;
    std::size_t n_trunc = 0;
    for (std::size_t i = 0; i < N; ++i) {
        n_trunc += truncated[i];
        if (!truncated[i] || cfg.transform.on_exit == ChartExit::Flag) tr_kept.push_back(tr[i]);
    }
    const double thr = cfg.transform.ks_threshold > 0.0
                           ? cfg.transform.ks_threshold
                           : std::max(0.02, 1.95 * std::sqrt(2.0 / static_cast<double>(N)));
    const double ks_br = ks_distance(ball, rad);
    const double ks_bt = ks_distance(ball, tr_kept);
    const double ks_rt = ks_distance(rad, tr_kept);

    std::ostringstream csv;
    csv << "pair,ks,n_a,n_b,threshold\n";
    fmt::print(csv, "ball-radial,{:.17g},{},{},{:.17g}\n", ks_br, N, N, thr);
    fmt::print(csv, "ball-transform,{:.17g},{},{},{:.17g}\n", ks_bt, N, tr_kept.size(), thr);
    fmt::print(csv, "radial-transform,{:.17g},{},{},{:.17g}\n", ks_rt, N, tr_kept.size(), thr);
    out.csv("transform_check.csv", csv.str());

    std::ostringstream q;
    q << "q,ball,radial,transform\n";
    for (int k = 1; k < 100; ++k) {
        const double qq = k / 100.0;
        fmt::print(q, "{},{:.17g},{:.17g},{:.17g}\n", qq, quantile(ball, qq), quantile(rad, qq),
                   tr_kept.empty() ? std::nan("") : quantile(tr_kept, qq));
    }
    out.csv("transform_quantiles.csv", q.str());

    Outcome res;
    res.summary = {{"ks_ball_radial", ks_br}, {"ks_ball_transform", ks_bt}, {"ks_radial_transform", ks_rt},
                   {"threshold", thr},        {"chart_exits", n_trunc},     {"replicas", N}};
    const double worst = std::max({ks_br, ks_bt, ks_rt});
    if (!(worst < thr)) {
        res.passed = false;
        res.message = fmt::format("KS distance {:.4g} is not below {:.4g}", worst, thr);
    }
    say(o, fmt::format("transform-check: KS ball/radial {:.4g}, ball/transform {:.4g}, radial/transform {:.4g} "
                       "(threshold {:.4g}, chart exits {})",
                       ks_br, ks_bt, ks_rt, thr, n_trunc));
    return res;
}

DomainSpec build_domain(const ExperimentConfig& cfg) {
    const auto& d = cfg.domain;
    try {
        if (d.shape == "sphere") {
            if (cfg.model.argument != CoeffArgument::Radius &&
                !(cfg.model.gamma.is_constant() && cfg.model.g.is_constant()))
                throw ConfigError("model.argument", "the sphere domain reads coefficients at |x|");
            return sphere_domain(cfg.model.n, cfg.model.gamma, cfg.model.g);
        }
        if (d.shape == "ellipsoid") {
            EllipsoidDrift drift;
            if (d.drift == "gradient")
                drift = EllipsoidDrift::Gradient;
            else if (d.drift == "inward")
                drift = EllipsoidDrift::Inward;
            else
                throw ConfigError("domain.drift", "expected gradient or inward");
            return ellipsoid_domain(d.semi_axes, drift);
        }
        if (d.shape == "expression") {
            const int n = static_cast<int>(d.b.size());
            if (d.phi.empty()) throw ConfigError("domain.phi", "required for expression domains");
            if (n == 0) throw ConfigError("domain.b", "required for expression domains");
            Point center = Point::Zero(n);
            if (!d.center.empty()) {
                if (static_cast<int>(d.center.size()) != n) throw ConfigError("domain.center", "wrong dimension");
                for (int i = 0; i < n; ++i) center(i) = d.center[static_cast<std::size_t>(i)];
            }
            return expression_domain(n, d.phi, d.h.empty() ? d.phi : d.h, d.sigma, d.b, center);
        }
    } catch (const ModelError& e) {
        throw ConfigError("domain", e.what());
    }
    throw ConfigError("domain.shape", "expected sphere, ellipsoid or expression");
}

Outcome run_domain(const ExperimentConfig& cfg, OutputSet& out, const RunOptions& o) {
    DomainSpec spec = build_domain(cfg);
    if (cfg.domain.h_neighborhood > 0.0) spec.h_neighborhood = cfg.domain.h_neighborhood;
    Outcome res;
    res.summary["domain"] = spec.name;
    const auto boundary = boundary_samples(spec, cfg.domain.boundary_samples, derive_seed(cfg.seed, {hash_tag("domain-boundary")}));
    const auto near = neighborhood_samples(spec, cfg.domain.neighborhood_samples,
                                           derive_seed(cfg.seed, {hash_tag("domain-neighborhood")}));
    const auto val = validate_domain(spec, boundary, near, derive_seed(cfg.seed, {hash_tag("domain-validate")}));
    res.summary["valid"] = val.ok;
    if (!val.ok) {
        res.passed = false;
        res.message = "domain hypotheses fail: " + val.failure;
        res.summary["failure"] = val.failure;
        out.json_file("domain.json", res.summary);
        return res;
    }
    try {
        const AlphaReport a = alpha(spec, boundary);
        std::ostringstream csv;
        csv << "sample";
        for (int i = 1; i <= spec.n; ++i) csv << ",x_" << i;
        csv << ",g,beta_norm,alpha\n";
        for (std::size_t k = 0; k < boundary.size(); ++k) {
            const auto dec = decompose_drift(spec, boundary[k]);
            fmt::print(csv, "{}", k);
            for (int i = 0; i < spec.n; ++i) fmt::print(csv, ",{:.17g}", boundary[k](i));
            fmt::print(csv, ",{:.17g},{:.17g},{:.17g}\n", dec.g, dec.beta.norm(), a.values[k]);
        }
        out.csv("domain_alpha.csv", csv.str());
        res.summary["alpha"] = {{"min", a.min},         {"max", a.max},
                                {"mean", a.mean},       {"relative_spread", a.relative_spread},
                                {"constant", a.constant}, {"above_threshold", a.above_threshold}};
        say(o, fmt::format("domain: {} alpha in [{:.10g}, {:.10g}] constant={} above threshold={}", spec.name, a.min,
                           a.max, a.constant, a.above_threshold));

        std::ostringstream fh;
        fh << "field,is_function,lipschitz_estimate,worst_spread,worst_h,bin_width,bins_used\n";
        const std::pair<const char*, std::function<double(const Point&)>> fields[] = {
            {"g_grad_h", g_times_grad_h(spec)}, {"a_grad_h_grad_h", a_grad_h(spec)}, {"grad_h_sq", grad_h_squared(spec)}};
        bool lipschitz_ok = true;
        for (const auto& [name, f] : fields) {
            const auto r = is_function_of_h(spec, f, near);
            fmt::print(fh, "{},{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", name, r.is_function ? 1 : 0,
                       r.lipschitz_estimate, r.worst_spread, r.worst_h, r.bin_width, r.bins_used);
            res.summary["function_of_h"][name] = r.is_function;
            if (std::string_view(name) != "grad_h_sq") lipschitz_ok = lipschitz_ok && r.is_function;
            say(o, fmt::format("domain: {} function of h: {} (L_est {:.4g})", name, r.is_function,
                               r.lipschitz_estimate));
        }
        out.csv("domain_function_of_h.csv", fh.str());

        if (cfg.domain.simulate) {
            const DomainTrajectory tr =
                simulate_domain(spec, boundary.front(), cfg.T, cfg.dt, derive_seed(cfg.seed, {hash_tag("domain"), 0}));
            std::ostringstream tc;
            tc << "t";
            for (int i = 1; i <= spec.n; ++i) tc << ",x_" << i;
            tc << ",h\n";
            for (Eigen::Index k = 0; k < tr.states.cols(); ++k) {
                fmt::print(tc, "{:.17g}", static_cast<double>(k) * cfg.dt);
                for (Eigen::Index i = 0; i < tr.states.rows(); ++i) fmt::print(tc, ",{:.17g}", tr.states(i, k));
                fmt::print(tc, ",{:.17g}\n", tr.h[static_cast<std::size_t>(k)]);
            }
            out.csv("domain_trajectory.csv", tc.str());
            res.summary["backtracks"] = tr.backtracks;
        }
        if (!a.constant || !lipschitz_ok) {
            res.passed = false;
            res.message = !a.constant ? "alpha is not constant on the boundary"
                                      : "g|grad h| or <a grad h, grad h> is not a function of h";
        }
    } catch (const HypothesisViolation& e) {
        res.passed = false;
        res.message = std::string("hypothesis violation: ") + e.what();
    }
    out.json_file("domain.json", res.summary);
    return res;
}

Outcome run_paper_tables(const ExperimentConfig& cfg, OutputSet& out, const RunOptions& o) {
    const OptimalP op = optimal_p();
    std::ostringstream t;
    t << "p_star,F_star,c_star\n";
    fmt::print(t, "{:.17g},{:.17g},{:.17g}\n", op.p, op.F, threshold_c());
    out.csv("threshold_constants.csv", t.str());
    say(o, fmt::format("threshold: p* = {:.6f}, F* = {:.6f}, c* = {:.6f}", op.p, op.F, threshold_c()));

    const auto rows = classification_table(cfg, cfg.classify.r_values, cfg.classify.c_values);
    out.csv("classification_table.csv", classification_csv(rows));
    for (const auto& row : rows)
        say(o, fmt::format("classification: r={:<5} c={:<5} {}", row.r, row.c,
                           row.cls.attainable() ? "attainable" : "unattainable"));

    Outcome res = run_inequalities(cfg, out, o);
    res.summary["p_star"] = op.p;
    res.summary["F_star"] = op.F;
    res.summary["c_star"] = threshold_c();
    return res;
}

}  // namespace

std::string to_string(ExperimentKind k) {
    for (const auto& kn : kKinds)
        if (kn.kind == k) return std::string(kn.name);
    return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view s) {
    for (const auto& kn : kKinds)
        if (kn.name == s) return kn.kind;
    throw ConfigError("experiment", fmt::format("unknown experiment kind '{}'", s));
}

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    cfg.out_dir = "out/" + to_string(kind);
    return cfg;
}

ExperimentConfig parse_config(std::string_view text, ExperimentKind kind) {
    ExperimentConfig cfg = default_config(kind);
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError("<root>", std::string("malformed YAML: ") + e.what());
    }
    if (root.IsNull()) return cfg;
    check_keys(root, "",
               {"experiment", "model", "numeric", "output", "simulate", "couple", "sweep", "classify", "inequalities",
                "occupation", "transform", "domain"});
    if (root["experiment"]) {
        std::string name;
        read(root, "", "experiment", name);
        if (parse_experiment_kind(name) != kind)
            throw ConfigError("experiment", fmt::format("config is for '{}', not '{}'", name, to_string(kind)));
    }
    if (root["model"]) parse_model(root["model"], cfg);
    for (const char* block :
         {"numeric", "output", "simulate", "couple", "sweep", "classify", "inequalities", "occupation", "transform",
          "domain"})
        parse_block(root, block, cfg);
    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path, ExperimentKind kind) {
    std::ifstream f(path);
    if (!f) throw ConfigError("--config", "cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), kind);
}

void validate_config(const ExperimentConfig& cfg) {
    auto positive = [](double v, const char* key) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key, "must be positive");
    };
    positive(cfg.T, "numeric.T");
    positive(cfg.dt, "numeric.dt");
    if (cfg.dt > cfg.T) throw ConfigError("numeric.dt", "must not exceed T");
    if (cfg.replicas == 0) throw ConfigError("numeric.replicas", "must be positive");
    try {
        cfg.model.validate();
    } catch (const std::exception& e) {
        throw ConfigError("model", e.what());
    }
    try {
        cfg.scheme.validate();
    } catch (const std::exception& e) {
        throw ConfigError("model.scheme", e.what());
    }
    auto depth = [](double v, const char* key) {
        if (!(v >= 0.0 && v < 1.0)) throw ConfigError(key, "must lie in [0, 1)");
    };
    auto all_positive = [](const std::vector<double>& v, const char* key) {
        if (v.empty()) throw ConfigError(key, "must not be empty");
        for (double x : v)
            if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(key, "entries must be positive");
    };
    switch (cfg.kind) {
        case ExperimentKind::Simulate:
            depth(cfg.simulate.start_depth, "simulate.start_depth");
            break;
        case ExperimentKind::Couple:
            depth(cfg.couple.start_depth, "couple.start_depth");
            depth(cfg.couple.partner_depth, "couple.partner_depth");
            if (cfg.couple.p != 0.0 && !(cfg.couple.p > 0.5 && cfg.couple.p < 1.0))
                throw ConfigError("couple.p", "must lie in (1/2, 1) or be 0 for automatic");
            if (cfg.couple.epsilon < 0.0) throw ConfigError("couple.epsilon", "must be >= 0");
            positive(cfg.couple.safety, "couple.safety");
            break;
        case ExperimentKind::Sweep:
            all_positive(cfg.sweep.c_values, "sweep.c_values");
            depth(cfg.sweep.start_depth, "sweep.start_depth");
            depth(cfg.sweep.partner_depth, "sweep.partner_depth");
            break;
        case ExperimentKind::Classify:
        case ExperimentKind::PaperTables:
            all_positive(cfg.classify.c_values, "classify.c_values");
            if (cfg.classify.r_values.empty()) throw ConfigError("classify.r_values", "must not be empty");
            for (double r : cfg.classify.r_values)
                if (!(r >= 0.0 && r < 1.0)) throw ConfigError("classify.r_values", "entries must lie in [0, 1)");
            if (!(cfg.classify.reference_point > 0.0 && cfg.classify.reference_point < 1.0))
                throw ConfigError("classify.reference_point", "must lie in (0, 1)");
            positive(cfg.classify.tolerance, "classify.tolerance");
            if (cfg.inequalities.samples == 0) throw ConfigError("inequalities.samples", "must be positive");
            if (cfg.inequalities.grid < 2) throw ConfigError("inequalities.grid", "must be at least 2");
            break;
        case ExperimentKind::VerifyInequalities:
            if (cfg.inequalities.samples == 0) throw ConfigError("inequalities.samples", "must be positive");
            if (cfg.inequalities.grid < 2) throw ConfigError("inequalities.grid", "must be at least 2");
            break;
        case ExperimentKind::Occupation:
            all_positive(cfg.occupation.deltas, "occupation.deltas");
            depth(cfg.occupation.start_depth, "occupation.start_depth");
            break;
        case ExperimentKind::TransformCheck:
            positive(cfg.transform.v_cap, "transform.v_cap");
            if (!(cfg.transform.chart_radius > 0.0 && cfg.transform.chart_radius < 1.0))
                throw ConfigError("transform.chart_radius", "must lie in (0, 1)");
            if (cfg.transform.ks_threshold < 0.0) throw ConfigError("transform.ks_threshold", "must be >= 0");
            if (cfg.model.n < 2) throw ConfigError("model.n", "the transformed system needs n >= 2");
            try {
                require_v_coefficients(cfg.model);
            } catch (const std::exception& e) {
                throw ConfigError("model.argument", e.what());
            }
            break;
        case ExperimentKind::Domain:
            if (cfg.domain.boundary_samples == 0) throw ConfigError("domain.boundary_samples", "must be positive");
            if (cfg.domain.neighborhood_samples < 2)
                throw ConfigError("domain.neighborhood_samples", "must be at least 2");
            if (cfg.domain.h_neighborhood < 0.0) throw ConfigError("domain.h_neighborhood", "must be >= 0");
            break;
    }
}

std::string resolved_yaml(const ExperimentConfig& cfg) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    emit(e, "experiment", to_string(cfg.kind));
    e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
    emit(e, "n", cfg.model.n);
    emit(e, "r", cfg.model.r);
    emit(e, "gamma", cfg.model.gamma.to_string());
    emit(e, "g", cfg.model.g.to_string());
    emit(e, "argument", to_string(cfg.model.argument));
    emit(e, "scheme", to_string(cfg.scheme.kind));
    emit(e, "substep_radius", cfg.scheme.substep_radius);
    emit(e, "substep_factor", cfg.scheme.substep_factor);
    e << YAML::EndMap;
    e << YAML::Key << "numeric" << YAML::Value << YAML::BeginMap;
    emit(e, "T", cfg.T);
    emit(e, "dt", cfg.dt);
    emit(e, "replicas", cfg.replicas);
    emit(e, "seed", cfg.seed);
    e << YAML::EndMap;
    switch (cfg.kind) {
        case ExperimentKind::Simulate:
            e << YAML::Key << "simulate" << YAML::Value << YAML::BeginMap;
            emit(e, "start_depth", cfg.simulate.start_depth);
            e << YAML::EndMap;
            break;
        case ExperimentKind::Couple: {
            const auto& c = cfg.couple;
            e << YAML::Key << "couple" << YAML::Value << YAML::BeginMap;
            emit(e, "start_depth", c.start_depth);
            emit(e, "partner_depth", c.partner_depth);
            emit(e, "angle", c.angle);
            emit(e, "p", c.p);
            emit(e, "epsilon", c.epsilon);
            emit(e, "safety", c.safety);
            emit(e, "min_held_fraction", c.min_held_fraction);
            e << YAML::EndMap;
            break;
        }
        case ExperimentKind::Sweep:
            e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
            emit_list(e, "c_values", cfg.sweep.c_values);
            emit(e, "start_depth", cfg.sweep.start_depth);
            emit(e, "partner_depth", cfg.sweep.partner_depth);
            emit(e, "angle", cfg.sweep.angle);
            e << YAML::EndMap;
            break;
        case ExperimentKind::Classify:
        case ExperimentKind::PaperTables:
            e << YAML::Key << "classify" << YAML::Value << YAML::BeginMap;
            emit_list(e, "r_values", cfg.classify.r_values);
            emit_list(e, "c_values", cfg.classify.c_values);
            emit(e, "reference_point", cfg.classify.reference_point);
            emit(e, "tolerance", cfg.classify.tolerance);
            e << YAML::EndMap;
            if (cfg.kind == ExperimentKind::Classify) break;
            [[fallthrough]];
        case ExperimentKind::VerifyInequalities:
            e << YAML::Key << "inequalities" << YAML::Value << YAML::BeginMap;
            emit(e, "samples", cfg.inequalities.samples);
            emit(e, "grid", cfg.inequalities.grid);
            e << YAML::EndMap;
            break;
        case ExperimentKind::Occupation:
            e << YAML::Key << "occupation" << YAML::Value << YAML::BeginMap;
            emit_list(e, "deltas", cfg.occupation.deltas);
            emit(e, "start_depth", cfg.occupation.start_depth);
            e << YAML::EndMap;
            break;
        case ExperimentKind::TransformCheck:
            e << YAML::Key << "transform" << YAML::Value << YAML::BeginMap;
            emit(e, "v_cap", cfg.transform.v_cap);
            emit(e, "chart_radius", cfg.transform.chart_radius);
            emit(e, "on_exit", std::string(cfg.transform.on_exit == ChartExit::Stop ? "stop" : "flag"));
            emit(e, "ks_threshold", cfg.transform.ks_threshold);
            e << YAML::EndMap;
            break;
        case ExperimentKind::Domain: {
            const auto& d = cfg.domain;
            e << YAML::Key << "domain" << YAML::Value << YAML::BeginMap;
            emit(e, "shape", d.shape);
            if (d.shape == "ellipsoid") {
                emit_list(e, "semi_axes", d.semi_axes);
                emit(e, "drift", d.drift);
            } else if (d.shape == "expression") {
                emit(e, "phi", d.phi);
                emit(e, "h", d.h.empty() ? d.phi : d.h);
                emit(e, "sigma", d.sigma);
                emit_list(e, "b", d.b);
                emit_list(e, "center", d.center);
            }
            emit(e, "h_neighborhood", d.h_neighborhood);
            emit(e, "boundary_samples", d.boundary_samples);
            emit(e, "neighborhood_samples", d.neighborhood_samples);
            emit(e, "simulate", std::string(d.simulate ? "true" : "false"));
            e << YAML::EndMap;
            break;
        }
    }
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(resolved_yaml(cfg)); }

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericError("SHA-256 computation failed");
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
}

RunResult run(const ExperimentConfig& cfg, const RunOptions& options) {
    RunResult result;
    try {
        validate_config(cfg);
        result.config_hash = config_hash(cfg);
        OutputSet out(cfg, result.config_hash);
        const auto start = std::chrono::steady_clock::now();
        Outcome oc;
        switch (cfg.kind) {
            case ExperimentKind::Simulate: oc = run_simulate(cfg, out, options); break;
            case ExperimentKind::Couple: oc = run_couple(cfg, out, options); break;
            case ExperimentKind::Sweep: oc = run_sweep(cfg, out, options); break;
            case ExperimentKind::Classify: oc = run_classify(cfg, out, options); break;
            case ExperimentKind::VerifyInequalities: oc = run_inequalities(cfg, out, options); break;
            case ExperimentKind::Occupation: oc = run_occupation(cfg, out, options); break;
            case ExperimentKind::TransformCheck: oc = run_transform_check(cfg, out, options); break;
            case ExperimentKind::Domain: oc = run_domain(cfg, out, options); break;
            case ExperimentKind::PaperTables: oc = run_paper_tables(cfg, out, options); break;
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.exit_code = oc.passed ? 0 : 1;
        result.message = oc.message;
        result.outputs = out.names();

        json manifest;
        manifest["experiment"] = to_string(cfg.kind);
        manifest["config"] = resolved_yaml(cfg);
        manifest["config_hash"] = result.config_hash;
        manifest["threads"] = cfg.threads;
        manifest["exit_status"] = result.exit_code;
        if (!oc.message.empty()) manifest["message"] = oc.message;
        manifest["summary"] = oc.summary;
        json files = json::array();
        for (std::size_t i = 0; i < out.names().size(); ++i)
            files.push_back({{"file", out.names()[i]}, {"sha256", out.hashes()[i]}});
        manifest["outputs"] = files;
        manifest["elapsed_seconds"] = seconds;
        manifest["created_unix"] =
            std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
                .count();
        std::ofstream mf(out.dir() / "manifest.json");
        if (!mf) throw ConfigError("output.dir", "cannot write manifest.json");
        mf << manifest.dump(2) << '\n';
        if (!oc.message.empty()) say(options, oc.message);
    } catch (const ConfigError& e) {
        result.exit_code = 2;
        result.message = e.what();
    }
    return result;
}

}  // namespace degdiff
