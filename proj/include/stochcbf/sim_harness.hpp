#pragma once

#include <cstdint>
#include <optional>

#include "stochcbf/exit_bounds.hpp"
#include "stochcbf/safety_filter.hpp"
#include "stochcbf/scenario.hpp"

namespace stochcbf {

struct SimOptions {
    SolverOptions solver;
    bool disable_noise = false;  // deterministic rollout (conditions still use Sigma)
};

/// One closed-loop rollout. states has horizon+1 entries, inputs and residuals
/// have horizon entries; residuals[k] is the (minimum) condition residual at
/// the applied input. first_exit_step is the smallest k with the state outside
/// the safe set, when any. tainted marks the use of the infeasibility
/// fallback.
struct TrajectoryRecord {
    std::vector<Vec> states;
    std::vector<Vec> inputs;
    std::vector<double> residuals;
    std::optional<int> first_exit_step;
    bool tainted = false;
    std::uint64_t seed = 0;
};

/// Simulates `scenario.horizon` steps from the initial state. While the state
/// stays safe the filtered input is applied; after first exit the nominal
/// policy runs unmodified (the exit is already counted). Deterministic per
/// seed. Propagates Infeasible under the `error` fallback policy.
TrajectoryRecord simulate_trajectory(const Scenario& scenario, const SimOptions& opts,
                                     std::uint64_t seed);

struct EmpiricalResult {
    int n_trials = 0;
    int n_exited = 0;
    int n_tainted = 0;
    double exit_frequency = 0.0;
    double cp_lo = 0.0;  // Clopper-Pearson 95% interval for the exit probability
    double cp_hi = 1.0;
    double theoretical_bound = 1.0;  // reported (clipped) bound
    double theoretical_bound_raw = 1.0;
    bool bound_satisfied = false;  // cp_lo <= theoretical_bound
};

/// Runs trials with seeds base_seed + i (independent per-trial streams) and
/// aggregates exit counts against the scenario bound. Trials may execute on
/// several threads; aggregation is ordered by trial index, so results are
/// reproducible for a fixed (base_seed, n_trials). max_threads <= 0 picks the
/// hardware default, capped by the STOCHCBF_THREADS environment variable.
/// When records is non-null it receives all trajectory records in trial order.
EmpiricalResult run_monte_carlo(const Scenario& scenario, const SimOptions& opts, int n_trials,
                                std::uint64_t base_seed, int max_threads = 0,
                                std::vector<TrajectoryRecord>* records = nullptr);

/// Exact (Clopper-Pearson) binomial confidence interval, suited to the
/// near-zero exit counts these experiments produce.
std::pair<double, double> clopper_pearson(int n_success, int n_trials, double confidence = 0.95);

/// One row of the supermartingale audit: at step k the closed-form conditional
/// expectation of Phi at k+1 (lhs) must not exceed Phi at k (rhs).
struct AuditEntry {
    int step = 0;
    int barrier_index = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool ok = false;
};

/// Audits every pre-exit step of a trajectory in Phi-space; the test is the
/// condition residual restated through the auxiliary function, at tolerance
/// lhs <= rhs + 1e-8.
std::vector<AuditEntry> audit_supermartingale(const TrajectoryRecord& record,
                                              const Scenario& scenario);

/// Draw from N(0, Sigma) through a cached Cholesky factor.
Vec sample_gaussian(const GaussianNoise& noise, NormalStream& stream);

/// Writes `k,x1..xn,u1..um,residual,exited` rows for one trajectory.
void write_trajectory_csv(const TrajectoryRecord& record, const Scenario& scenario,
                          std::ostream& os, bool header = true);

}  // namespace stochcbf
