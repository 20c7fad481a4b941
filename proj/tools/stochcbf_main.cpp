#include <iostream>

#include <CLI11.hpp>

#include "stochcbf/cli.hpp"

namespace {

void add_scenario_flags(CLI::App* app, stochcbf::RunConfig& cfg) {
    app->add_option("--preset", cfg.preset_id, "built-in scenario id (see list-scenarios)");
    app->add_option("--scenario", cfg.scenario_path, "scenario JSON file");
    app->add_option("--horizon", [&cfg](const std::vector<std::string>& v) {
        cfg.horizon_override = std::stoi(v.at(0));
        return true;
    }, "override the scenario horizon K");
}

void add_solver_flags(CLI::App* app, stochcbf::RunConfig& cfg) {
    app->add_option("--solver-tol", cfg.solver.kkt_tol, "KKT constraint tolerance");
    app->add_option("--multistart", cfg.solver.multistart_extra,
                    "extra multistart points beyond the axis pattern");
    std::map<std::string, stochcbf::FallbackPolicy> fallback{
        {"error", stochcbf::FallbackPolicy::error},
        {"max-residual", stochcbf::FallbackPolicy::max_residual}};
    app->add_option("--fallback", cfg.solver.fallback, "infeasibility fallback policy")
        ->transform(CLI::CheckedTransformer(fallback, CLI::ignore_case));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochcbf: probabilistically safe control synthesis and validation"};
    app.require_subcommand(1);

    stochcbf::RunConfig cfg;
    std::map<std::string, stochcbf::OutputFormat> formats{
        {"json", stochcbf::OutputFormat::json}, {"csv", stochcbf::OutputFormat::csv}};

    auto* run = app.add_subcommand("run", "Monte-Carlo trials of a scenario");
    add_scenario_flags(run, cfg);
    add_solver_flags(run, cfg);
    run->add_option("--trials", cfg.n_trials, "number of trials");
    run->add_option("--seed", cfg.base_seed, "base seed; trial i uses base_seed + i");
    run->add_option("--out", cfg.out_dir, "output directory");
    run->add_option("--max-trajectories", cfg.max_trajectories,
                    "cap trajectories.csv (0 keeps every trial)");
    run->add_flag("--strict", cfg.strict, "exit 3 when any trial used the fallback");
    run->add_option("--threads", cfg.threads, "max worker threads");

    auto* bounds = app.add_subcommand("bounds", "print theoretical exit bounds");
    add_scenario_flags(bounds, cfg);
    bounds->add_option("--format", cfg.format, "json or csv")
        ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));

    auto* grid = app.add_subcommand("grid", "emit a bound heatmap CSV");
    add_scenario_flags(grid, cfg);
    grid->add_option("--out", cfg.out_dir, "output directory");
    std::vector<double> grid_vals;
    grid->add_option("--grid", grid_vals,
                     "x1min x1max n1 [x2min x2max n2] (defaults come from the preset)")
        ->expected(3, 6);

    auto* verify = app.add_subcommand("verify", "run the invariant suite");
    verify->add_flag("--fast", cfg.verify_fast, "trimmed subset, finishes in under a minute");
    verify->add_flag("--inject-corruption", cfg.verify_inject_corruption,
                     "test hook: corrupt a closed form so the suite must fail")
        ->group("");  // hidden
    verify->add_option("--threads", cfg.threads, "max worker threads");

    auto* list = app.add_subcommand("list-scenarios", "enumerate built-in scenarios");
    (void)list;

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) cfg.command = stochcbf::Command::run;
        if (bounds->parsed()) cfg.command = stochcbf::Command::bounds;
        if (grid->parsed()) {
            cfg.command = stochcbf::Command::grid;
            if (!grid_vals.empty()) {
                stochcbf::GridSpec spec;
                spec.x1_min = grid_vals.at(0);
                spec.x1_max = grid_vals.at(1);
                spec.n1 = static_cast<int>(grid_vals.at(2));
                if (grid_vals.size() >= 6) {
                    spec.x2_min = grid_vals.at(3);
                    spec.x2_max = grid_vals.at(4);
                    spec.n2 = static_cast<int>(grid_vals.at(5));
                }
                cfg.grid_override = spec;
            }
        }
        if (verify->parsed()) cfg.command = stochcbf::Command::verify;
        if (list->parsed()) cfg.command = stochcbf::Command::list_scenarios;
        return stochcbf::run_command(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
