#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stochcbf/cli.hpp"
#include "stochcbf/scenario_json.hpp"
#include "test_util.hpp"

using namespace stochcbf;
using namespace stochcbf::testutil;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("stochcbf_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct CaptureStdout {
    std::ostringstream buffer;
    std::streambuf* old;
    CaptureStdout() : old(std::cout.rdbuf(buffer.rdbuf())) {}
    ~CaptureStdout() { std::cout.rdbuf(old); }
};

}  // namespace

TEST_CASE("cmd_run writes summary and trajectories with the documented schema") {
    const auto dir = fresh_dir("run");
    RunConfig cfg;
    cfg.command = Command::run;
    cfg.preset_id = "pendulum_expquad";
    cfg.n_trials = 30;
    cfg.base_seed = 7;
    cfg.out_dir = dir.string();
    CaptureStdout cap;
    CHECK(cmd_run(cfg) == 0);

    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("schema_version") == 1);
    CHECK(summary.at("scenario") == "pendulum_expquad");
    CHECK(summary.at("n_trials") == 30);
    CHECK(summary.at("base_seed") == 7);
    CHECK(summary.at("n_tainted") == 0);
    CHECK(summary.at("theoretical_bound").get<double>() ==
          doctest::Approx(1.0453999297624849e-03).epsilon(1e-12));
    CHECK(summary.at("bound_satisfied") == true);
    CHECK(summary.at("clopper_pearson_95").size() == 2);

    std::istringstream traj(slurp(dir / "trajectories.csv"));
    std::string line;
    std::getline(traj, line);
    CHECK(line.rfind("# stochcbf trajectories", 0) == 0);
    std::getline(traj, line);
    CHECK(line.rfind("# trial=0 seed=7", 0) == 0);
    std::getline(traj, line);
    CHECK(line == "k,x1,x2,u1,residual,exited");
}

TEST_CASE("cmd_run is byte-deterministic for a fixed config") {
    const auto dir1 = fresh_dir("det1");
    const auto dir2 = fresh_dir("det2");
    RunConfig cfg;
    cfg.command = Command::run;
    cfg.preset_id = "affine_1d";
    cfg.n_trials = 25;
    cfg.base_seed = 11;
    cfg.out_dir = dir1.string();
    CaptureStdout cap;
    CHECK(cmd_run(cfg) == 0);
    cfg.out_dir = dir2.string();
    CHECK(cmd_run(cfg) == 0);
    CHECK(slurp(dir1 / "summary.json") == slurp(dir2 / "summary.json"));
    CHECK(slurp(dir1 / "trajectories.csv") == slurp(dir2 / "trajectories.csv"));
}

TEST_CASE("cmd_run caps trajectories when asked") {
    const auto dir = fresh_dir("cap");
    RunConfig cfg;
    cfg.command = Command::run;
    cfg.preset_id = "affine_1d";
    cfg.n_trials = 10;
    cfg.max_trajectories = 2;
    cfg.out_dir = dir.string();
    CaptureStdout cap;
    CHECK(cmd_run(cfg) == 0);
    const std::string traj = slurp(dir / "trajectories.csv");
    CHECK(traj.find("# trial=1 ") != std::string::npos);
    CHECK(traj.find("# trial=2 ") == std::string::npos);
}

TEST_CASE("cmd_run rejects bad configurations") {
    RunConfig cfg;
    cfg.command = Command::run;
    cfg.preset_id = "affine_1d";
    cfg.n_trials = 0;
    CHECK_THROWS_AS(cmd_run(cfg), ContractViolation);

    cfg.n_trials = 5;
    cfg.preset_id = "unknown_preset";
    CHECK_THROWS_AS(cmd_run(cfg), ContractViolation);

    cfg.preset_id.clear();
    CHECK_THROWS_AS(cmd_run(cfg), ContractViolation);

    cfg.preset_id = "affine_1d";
    cfg.scenario_path = "/nonexistent/file.json";
    CHECK_THROWS_AS(cmd_run(cfg), ContractViolation);
}

TEST_CASE("exit code mapping") {
    EmpiricalResult r;
    r.bound_satisfied = true;
    r.n_tainted = 0;
    CHECK(run_exit_code(r, false) == 0);
    CHECK(run_exit_code(r, true) == 0);
    r.n_tainted = 2;
    CHECK(run_exit_code(r, false) == 0);
    CHECK(run_exit_code(r, true) == 3);
    r.bound_satisfied = false;
    CHECK(run_exit_code(r, true) == 2);
}

TEST_CASE("strict runs flag tainted trials through the exit code") {
    // The trace-formula level is infeasible at the origin, so with the
    // max-residual fallback every trial taints; strict mode surfaces that.
    auto scenario = preset("pendulum_poly").scenario;
    const double beta_formula = max_feasible_beta_poly(scenario.safe_set.barriers()[0],
                                                       scenario.system.noise_cov());
    scenario.conditions = {make_polynomial_squared(beta_formula, 1.0)};
    const auto dir = fresh_dir("strict");
    save_scenario(scenario, (dir / "scenario.json").string());

    RunConfig cfg;
    cfg.command = Command::run;
    cfg.scenario_path = (dir / "scenario.json").string();
    cfg.n_trials = 3;
    cfg.base_seed = 5;
    cfg.out_dir = dir.string();
    cfg.strict = true;
    cfg.solver.fallback = FallbackPolicy::max_residual;
    CaptureStdout cap;
    CHECK(cmd_run(cfg) == 3);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("n_tainted") == 3);
}

TEST_CASE("cmd_bounds prints a table for all presets and both formats") {
    RunConfig cfg;
    cfg.command = Command::bounds;
    std::string json_text, csv_text;
    {
        CaptureStdout cap;
        CHECK(cmd_bounds(cfg) == 0);
        json_text = cap.buffer.str();
    }
    {
        CaptureStdout cap;
        cfg.format = OutputFormat::csv;
        CHECK(cmd_bounds(cfg) == 0);
        csv_text = cap.buffer.str();
    }
    const auto parsed = nlohmann::json::parse(json_text);
    REQUIRE(parsed.at("bounds").size() == 6);
    // Same values through both formats.
    for (const auto& item : parsed.at("bounds")) {
        const std::string name = item.at("scenario");
        CHECK(csv_text.find(name + ",") != std::string::npos);
    }
    double expquad_bound = -1.0;
    for (const auto& item : parsed.at("bounds"))
        if (item.at("scenario") == "pendulum_expquad") expquad_bound = item.at("bound_raw");
    CHECK(expquad_bound == doctest::Approx(1.0453999297624849e-03).epsilon(1e-12));
}

TEST_CASE("cmd_grid writes the heatmap CSV") {
    const auto dir = fresh_dir("grid");
    RunConfig cfg;
    cfg.command = Command::grid;
    cfg.preset_id = "affine_1d";
    cfg.out_dir = dir.string();
    CaptureStdout cap;
    CHECK(cmd_grid(cfg) == 0);
    std::istringstream is(slurp(dir / "grid.csv"));
    std::string line;
    std::getline(is, line);
    CHECK(line.rfind("# stochcbf grid", 0) == 0);
    std::getline(is, line);
    CHECK(line == "x1,x2,bound");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 301);  // preset default: 301 points over [0, 3]

    // A single-point grid override equals the scalar bound.
    cfg.grid_override = GridSpec{1.0, 1.0, 1, 0.0, 0.0, 1};
    CHECK(cmd_grid(cfg) == 0);
    std::istringstream point(slurp(dir / "grid.csv"));
    std::getline(point, line);
    std::getline(point, line);
    std::getline(point, line);
    CHECK(line.rfind("1,0,0.015", 0) == 0);
}

TEST_CASE("cmd_verify passes clean and fails under corruption") {
    RunConfig cfg;
    cfg.command = Command::verify;
    cfg.verify_fast = true;
    {
        CaptureStdout cap;
        CHECK(cmd_verify(cfg) == 0);
        CHECK(cap.buffer.str().find("FAIL") == std::string::npos);
    }
    {
        CaptureStdout cap;
        cfg.verify_inject_corruption = true;
        CHECK(cmd_verify(cfg) == 1);
        CHECK(cap.buffer.str().find("FAIL") != std::string::npos);
    }
}

TEST_CASE("cmd_list_scenarios enumerates the presets") {
    RunConfig cfg;
    cfg.command = Command::list_scenarios;
    CaptureStdout cap;
    CHECK(run_command(cfg) == 0);
    const std::string out = cap.buffer.str();
    for (const auto& id : preset_ids()) CHECK(out.find(id) != std::string::npos);
}

TEST_CASE("scenario files round-trip through the run command") {
    const auto dir = fresh_dir("file");
    const auto p = preset("pendulum_linear");
    save_scenario(p.scenario, (dir / "scn.json").string());

    RunConfig by_preset;
    by_preset.command = Command::run;
    by_preset.preset_id = "pendulum_linear";
    by_preset.n_trials = 15;
    by_preset.base_seed = 3;
    by_preset.out_dir = (dir / "a").string();

    RunConfig by_file = by_preset;
    by_file.preset_id.clear();
    by_file.scenario_path = (dir / "scn.json").string();
    by_file.out_dir = (dir / "b").string();

    CaptureStdout cap;
    CHECK(cmd_run(by_preset) == 0);
    CHECK(cmd_run(by_file) == 0);
    const auto a = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
    const auto b = nlohmann::json::parse(slurp(dir / "b" / "summary.json"));
    CHECK(a.at("n_exited") == b.at("n_exited"));
    CHECK(a.at("exit_frequency") == b.at("exit_frequency"));
    CHECK(a.at("theoretical_bound") == b.at("theoretical_bound"));
}

TEST_CASE("horizon override reaches both the simulation and the bound") {
    const auto dir = fresh_dir("horizon");
    RunConfig cfg;
    cfg.command = Command::run;
    cfg.preset_id = "pendulum_expquad";
    cfg.n_trials = 5;
    cfg.horizon_override = 20;
    cfg.out_dir = dir.string();
    CaptureStdout cap;
    CHECK(cmd_run(cfg) == 0);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("horizon") == 20);
    CHECK(summary.at("theoretical_bound").get<double>() ==
          doctest::Approx(std::exp(-10.0) + 20 * 1e-5).epsilon(1e-12));
}
