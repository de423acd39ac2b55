#include <CLI11.hpp>

#include "meanref/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"meanref-lq: stochastic LQ control with a mean path constraint"};
    app.require_subcommand(1);

    meanref::RunConfig config;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--problem", config.problem_path, "problem file (JSON)")->required();
        cmd->add_option("--grid", config.grid, "override the number of time steps");
        cmd->add_option("--paths", config.paths, "Monte Carlo paths");
        cmd->add_option("--seed", config.seed, "Monte Carlo seed");
        cmd->add_flag("--antithetic", config.antithetic, "antithetic path pairing");
        cmd->add_option("--n0", config.n0, "first penalty weight");
        cmd->add_option("--ratio", config.ratio, "penalty schedule ratio");
        cmd->add_option("--stages", config.stages, "penalty schedule stages");
        cmd->add_option("--out", config.out_dir, "output directory");
        cmd->add_option("--feas-tol", config.feas_rel, "relative feasibility tolerance");
        cmd->add_option("--comp-tol", config.comp_rel, "relative complementarity tolerance");
        cmd->add_option("--delta", config.delta, "assumption margin for R");
        cmd->add_option("--eps", config.eps, "assumption margin for B^T B");
        cmd->add_option("--tree-steps", config.tree_steps, "tree oracle depth");
        cmd->add_option("--trials", config.trials, "fuzz trials for verify");
    };

    for (const char* name : {"solve", "simulate", "verify", "sweep-n", "oracle-compare"})
        add_common(app.add_subcommand(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return meanref::kConfigError;
    }

    config.command = app.get_subcommands().front()->get_name();
    return meanref::run(config);
}
