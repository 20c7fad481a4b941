#pragma once

#include <optional>

#include "stochcbf/scenarios.hpp"
#include "stochcbf/sim_harness.hpp"
#include "stochcbf/verify.hpp"

namespace stochcbf {

enum class Command { run, bounds, grid, verify, list_scenarios };
enum class OutputFormat { json, csv };

/// Everything a CLI invocation needs; flag parsing lives in the tool, the
/// command implementations here are what the tests drive.
struct RunConfig {
    Command command = Command::run;
    std::string preset_id;      // one of preset_ids(), or empty
    std::string scenario_path;  // scenario JSON file, or empty
    int n_trials = 200;
    std::uint64_t base_seed = 1;
    std::optional<int> horizon_override;
    std::string out_dir = ".";
    OutputFormat format = OutputFormat::json;
    SolverOptions solver;
    bool strict = false;        // exit 3 when any trial is tainted
    int max_trajectories = 0;   // cap on trajectories.csv rows; 0 keeps all trials
    std::optional<GridSpec> grid_override;
    bool verify_fast = false;
    bool verify_inject_corruption = false;  // test hook
    int threads = 0;            // 0 = hardware default (still capped by STOCHCBF_THREADS)
};

// Exit codes: 0 success, 1 usage/IO error, 2 bound violated, 3 tainted trials
// under --strict.
int run_exit_code(const EmpiricalResult& result, bool strict);

int cmd_run(const RunConfig& cfg);
int cmd_bounds(const RunConfig& cfg);
int cmd_grid(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);
int cmd_list_scenarios(const RunConfig& cfg);

int run_command(const RunConfig& cfg);

}  // namespace stochcbf
