#include "stochcbf/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "stochcbf/scenario_json.hpp"

namespace stochcbf {

namespace {

using nlohmann::ordered_json;

constexpr int kSummarySchemaVersion = 1;

struct LoadedScenario {
    Scenario scenario;
    std::optional<GridSpec> default_grid;
    std::string source;
};

LoadedScenario load_from_config(const RunConfig& cfg) {
    if (!cfg.preset_id.empty() && !cfg.scenario_path.empty())
        throw ContractViolation("give either a preset id or a scenario file, not both");
    if (!cfg.preset_id.empty()) {
        ScenarioPreset p = preset(cfg.preset_id);
        return {std::move(p.scenario), p.default_grid, cfg.preset_id};
    }
    if (!cfg.scenario_path.empty())
        return {load_scenario(cfg.scenario_path), std::nullopt, cfg.scenario_path};
    throw ContractViolation("no scenario given: use a preset id or a scenario file");
}

Scenario with_horizon(Scenario s, const std::optional<int>& override_horizon) {
    if (override_horizon) {
        if (*override_horizon < 1) throw ContractViolation("horizon must be >= 1");
        s.horizon = *override_horizon;
    }
    return s;
}

std::filesystem::path prepare_out_dir(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.out_dir.empty() ? "." : cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ContractViolation("cannot create output directory " + dir.string());
    return dir;
}

ordered_json solver_to_json(const SolverOptions& o) {
    ordered_json j;
    j["feasibility_tol"] = o.feasibility_tol;
    j["kkt_tol"] = o.kkt_tol;
    j["max_kkt_iterations"] = o.max_kkt_iterations;
    j["multistart_extra"] = o.multistart_extra;
    j["multistart_radius_scale"] = o.multistart_radius_scale;
    j["fallback"] = o.fallback == FallbackPolicy::error ? "error" : "max-residual";
    return j;
}

ordered_json bound_to_json(const BoundReport& b) {
    ordered_json j;
    j["family"] = b.family;
    j["horizon"] = b.horizon;
    j["bound"] = b.reported;
    j["bound_raw"] = b.raw;
    ordered_json x0 = ordered_json::array();
    for (long i = 0; i < b.initial_state.size(); ++i) x0.push_back(b.initial_state[i]);
    j["initial_state"] = std::move(x0);
    j["per_barrier_terms"] = b.per_barrier_terms;
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractViolation("cannot open for writing: " + path.string());
    out << text;
}

}  // namespace

int run_exit_code(const EmpiricalResult& result, bool strict) {
    if (!result.bound_satisfied) return 2;
    if (strict && result.n_tainted > 0) return 3;
    return 0;
}

int cmd_run(const RunConfig& cfg) {
    if (cfg.n_trials < 1) throw ContractViolation("run needs --trials >= 1");
    const LoadedScenario loaded = load_from_config(cfg);
    const Scenario scenario = with_horizon(loaded.scenario, cfg.horizon_override);
    const auto dir = prepare_out_dir(cfg);

    SimOptions sim;
    sim.solver = cfg.solver;
    std::vector<TrajectoryRecord> records;
    const EmpiricalResult res =
        run_monte_carlo(scenario, sim, cfg.n_trials, cfg.base_seed, cfg.threads, &records);

    ordered_json summary;
    summary["schema_version"] = kSummarySchemaVersion;
    summary["generator"] = "stochcbf";
    summary["command"] = "run";
    summary["scenario"] = scenario.name.empty() ? loaded.source : scenario.name;
    summary["source"] = loaded.source;
    summary["horizon"] = scenario.horizon;
    summary["n_trials"] = res.n_trials;
    summary["base_seed"] = cfg.base_seed;
    summary["n_exited"] = res.n_exited;
    summary["n_tainted"] = res.n_tainted;
    summary["exit_frequency"] = res.exit_frequency;
    summary["clopper_pearson_95"] = {res.cp_lo, res.cp_hi};
    summary["theoretical_bound"] = res.theoretical_bound;
    summary["theoretical_bound_raw"] = res.theoretical_bound_raw;
    summary["bound_satisfied"] = res.bound_satisfied;
    summary["solver"] = solver_to_json(cfg.solver);
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");

    std::ostringstream traj;
    traj << "# stochcbf trajectories schema_version=" << kSummarySchemaVersion << "\n";
    const int cap = cfg.max_trajectories > 0
                        ? std::min<int>(cfg.max_trajectories, static_cast<int>(records.size()))
                        : static_cast<int>(records.size());
    for (int i = 0; i < cap; ++i) {
        traj << "# trial=" << i << " seed=" << records[i].seed
             << " exited=" << (records[i].first_exit_step ? 1 : 0)
             << " tainted=" << (records[i].tainted ? 1 : 0) << "\n";
        write_trajectory_csv(records[i], scenario, traj, i == 0);
    }
    write_text_file(dir / "trajectories.csv", traj.str());

    std::cout << "scenario " << summary["scenario"].get<std::string>() << ": " << res.n_exited
              << "/" << res.n_trials << " exits, bound " << res.theoretical_bound
              << ", CP95 [" << res.cp_lo << ", " << res.cp_hi << "]"
              << (res.n_tainted ? ", TAINTED " + std::to_string(res.n_tainted) : "") << "\n";

    return run_exit_code(res, cfg.strict);
}

int cmd_bounds(const RunConfig& cfg) {
    std::vector<std::pair<std::string, BoundReport>> reports;
    if (cfg.preset_id.empty() && cfg.scenario_path.empty()) {
        for (const auto& id : preset_ids()) {
            ScenarioPreset p = preset(id);
            Scenario s = with_horizon(std::move(p.scenario), cfg.horizon_override);
            reports.emplace_back(id, scenario_bound(s));
        }
    } else {
        const LoadedScenario loaded = load_from_config(cfg);
        const Scenario s = with_horizon(loaded.scenario, cfg.horizon_override);
        reports.emplace_back(loaded.source, scenario_bound(s));
    }

    if (cfg.format == OutputFormat::json) {
        ordered_json out;
        out["schema_version"] = kSummarySchemaVersion;
        out["command"] = "bounds";
        ordered_json items = ordered_json::array();
        for (const auto& [name, report] : reports) {
            ordered_json item = bound_to_json(report);
            item["scenario"] = name;
            items.push_back(std::move(item));
        }
        out["bounds"] = std::move(items);
        std::cout << out.dump(2) << "\n";
    } else {
        std::cout << std::setprecision(17) << "scenario,family,horizon,bound,bound_raw\n";
        for (const auto& [name, report] : reports)
            std::cout << name << ',' << report.family << ',' << report.horizon << ','
                      << report.reported << ',' << report.raw << "\n";
    }
    return 0;
}

int cmd_grid(const RunConfig& cfg) {
    const LoadedScenario loaded = load_from_config(cfg);
    const Scenario scenario = with_horizon(loaded.scenario, cfg.horizon_override);
    GridSpec spec;
    if (cfg.grid_override) {
        spec = *cfg.grid_override;
    } else if (loaded.default_grid) {
        spec = *loaded.default_grid;
    } else {
        throw ContractViolation("scenario files need an explicit grid (--grid)");
    }
    const BoundGrid grid = bound_grid(scenario, spec, scenario.horizon);
    const auto dir = prepare_out_dir(cfg);
    std::ostringstream os;
    os << "# stochcbf grid schema_version=" << kSummarySchemaVersion << "\n";
    write_grid_csv(grid, os);
    write_text_file(dir / "grid.csv", os.str());
    std::cout << "grid " << spec.n1 << "x" << spec.n2 << " written to "
              << (dir / "grid.csv").string() << "\n";
    return 0;
}

int cmd_verify(const RunConfig& cfg) {
    VerifyOptions opts;
    opts.fast = cfg.verify_fast;
    opts.inject_corruption = cfg.verify_inject_corruption;
    opts.max_threads = cfg.threads;
    const auto results = run_verification(opts);
    int failed = 0;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.detail << ")\n";
        if (!r.passed) ++failed;
    }
    std::cout << (failed == 0 ? "all checks passed" : std::to_string(failed) + " checks FAILED")
              << "\n";
    return failed == 0 ? 0 : 1;
}

int cmd_list_scenarios(const RunConfig&) {
    for (const auto& id : preset_ids()) {
        const ScenarioPreset p = preset(id);
        std::cout << id << "  [K=" << p.scenario.horizon << ", bound=" << p.expected_bound
                  << "]  " << p.figure_ref << "\n";
    }
    return 0;
}

int run_command(const RunConfig& cfg) {
    switch (cfg.command) {
        case Command::run: return cmd_run(cfg);
        case Command::bounds: return cmd_bounds(cfg);
        case Command::grid: return cmd_grid(cfg);
        case Command::verify: return cmd_verify(cfg);
        case Command::list_scenarios: return cmd_list_scenarios(cfg);
    }
    throw ContractViolation("unknown command");
}

}  // namespace stochcbf
