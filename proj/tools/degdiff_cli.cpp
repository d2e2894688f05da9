#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "degdiff/errors.hpp"
#include "degdiff/experiment.hpp"
#include "degdiff/parallel.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<unsigned> threads;
    bool quiet = false;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "YAML experiment config");
    sub->add_option("--seed", f.seed, "base seed (overrides the config)");
    sub->add_option("--out", f.out, "output directory (overrides the config)");
    sub->add_option("--threads", f.threads, "worker threads (0 = hardware)");
    sub->add_flag("--quiet", f.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
    using namespace degdiff;
    CLI::App app{"Boundary-degenerate diffusions on the ball: simulation, coupling and verification"};
    app.require_subcommand(1);
    Flags flags;
    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "simulate ball trajectories"},
        {"couple", "coupled paths with singular-term diagnostics"},
        {"sweep", "coupling sweep over constant drifts c"},
        {"classify", "Feller classification of the boundary over (r, c)"},
        {"verify-inequalities", "check the scalar inequalities"},
        {"occupation", "time spent near the boundary"},
        {"transform-check", "compare ball, radial and transformed laws of 1 - |X_T|^2"},
        {"domain", "general-domain hypotheses, alpha and simulation"},
        {"paper-tables", "threshold constants, classification table, inequality summary"},
    };
    for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        const ExperimentKind kind = parse_experiment_kind(name);
        ExperimentConfig cfg = flags.config.empty() ? default_config(kind) : load_config(flags.config, kind);
        if (flags.seed) cfg.seed = *flags.seed;
        if (!flags.out.empty()) cfg.out_dir = flags.out;
        if (flags.threads) cfg.threads = *flags.threads;
        if (cfg.threads > 0) set_default_threads(cfg.threads);

        RunOptions opts;
        opts.quiet = flags.quiet;
        opts.log = &std::cout;
        const RunResult res = run(cfg, opts);
        if (res.exit_code == 2) {
            std::cerr << "config error: " << res.message << '\n';
        } else if (!flags.quiet) {
            std::cout << "config_hash " << res.config_hash << '\n';
            std::cout << "wrote " << res.outputs.size() << " file(s) to " << cfg.out_dir << '\n';
        }
        if (res.exit_code == 1 && flags.quiet) std::cerr << res.message << '\n';
        return res.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
